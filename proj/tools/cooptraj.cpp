// cooptraj: run scenarios, batch matrices, packaged demos, and the live
// session service.
//
// Exit codes: 0 success, 2 validation error, 3 runtime error.

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cooptraj/harness.hpp"
#include "cooptraj/service.hpp"

namespace fs = std::filesystem;
using namespace cooptraj;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void configure_logging() {
    spdlog::set_default_logger(spdlog::stderr_color_mt("cooptraj"));
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("COOPTRAJ_LOG")) {
        const auto parsed = spdlog::level::from_str(level);
        // from_str maps unknown names to "off"
        if (parsed != spdlog::level::off || std::string(level) == "off") {
            spdlog::set_level(parsed);
        } else {
            spdlog::warn("COOPTRAJ_LOG: unknown level '{}', keeping 'warn'", level);
        }
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationFailure("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    spdlog::info("wrote {}", path.string());
}

Scenario load_scenario(const fs::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw ValidationFailure(path.string() + ": " + e.what());
    }
    Scenario s = scenario_from_json(j);
    s.validate();
    return s;
}

struct Common {
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string format{"json"};
};

void emit_report(const RunReport& report, const Common& opt) {
    if (!opt.out.empty()) {
        const fs::path dir(opt.out);
        fs::create_directories(dir);
        write_file(dir / "report.json", dump(to_json(report)) + "\n");
        write_file(dir / "summary.json", dump(to_json(report.summary)) + "\n");
        write_file(dir / "trace.csv", trace_csv(report.trace));
        if (!report.transcript.empty()) write_file(dir / "transcript.jsonl", report.transcript);
        std::vector<MatrixRow> row{summary_row(report)};
        write_file(dir / "matrix.csv", matrix_csv(row));
    }
    if (opt.format == "csv") {
        std::cout << matrix_csv({summary_row(report)});
    } else {
        std::cout << to_json(report).dump(2) << "\n";
    }
}

int run_one(Scenario s, const Common& opt) {
    if (opt.seed) s.seed = *opt.seed;
    spdlog::info("running scenario '{}' (seed {})", s.id, s.seed);
    const RunReport report = run_scenario(s);
    spdlog::info("scenario '{}' finished in {:.3f} s", s.id, report.wall_time);
    emit_report(report, opt);
    return 0;
}

int run_matrix_dir(const fs::path& dir, int repetitions, unsigned threads, bool sweep, const Common& opt) {
    if (!fs::is_directory(dir)) throw ValidationFailure(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationFailure("no *.json scenarios in " + dir.string());
    std::vector<Scenario> scenarios;
    for (const auto& f : files) {
        Scenario s = load_scenario(f);
        if (opt.seed) s.seed = *opt.seed;
        if (sweep) {
            for (auto& v : policy_sweep(s)) scenarios.push_back(std::move(v));
        } else {
            scenarios.push_back(std::move(s));
        }
    }
    spdlog::info("matrix: {} scenarios x {} repetitions on {} threads", scenarios.size(), repetitions, threads);
    const auto rows = run_matrix(scenarios, repetitions, threads);
    const auto aggregates = aggregate_by_policy(rows);
    for (const auto& r : rows) {
        if (r.status != "ok") spdlog::warn("scenario '{}' rep {} failed: {}", r.scenario, r.repetition, r.error);
    }
    if (!opt.out.empty()) {
        fs::create_directories(opt.out);
        write_file(fs::path(opt.out) / "matrix.csv", matrix_csv(rows));
        write_file(fs::path(opt.out) / "policies.csv", aggregate_csv(aggregates));
    }
    if (opt.format == "json") {
        Json j = Json::array();
        for (const auto& a : aggregates) {
            j.push_back(Json{{"policy", a.policy},
                             {"runs", a.runs},
                             {"failed", a.failed},
                             {"mean_steady_state_conflict", a.mean_steady_state_conflict},
                             {"mean_rounds", a.mean_rounds},
                             {"safety_violations", a.safety_violations}});
        }
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << aggregate_csv(aggregates);
    }
    return 0;
}

int serve(const ServerOptions& server_options, const SessionOptions& session_options) {
    // block termination signals in every thread; the main thread waits for them
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    SessionManager manager(session_options);
    SessionServer server(manager, server_options);
    const auto port = server.start();
    std::cout << "listening on ws://" << server_options.address << ":" << port << "/" << std::endl;
    spdlog::info("static assets: {}", server_options.static_dir.empty() ? "(none)" : server_options.static_dir.string());
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {}, shutting down", sig);
    server.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Cooperative trajectory planning between a human and an automation"};
    app.require_subcommand(1);

    Common opt;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", opt.out, "Output directory");
        cmd->add_option("--seed", opt.seed, "Override the scenario seed");
        cmd->add_option("--format", opt.format, "Standard output format")
            ->check(CLI::IsMember({"csv", "json"}));
    };

    std::string scenario_path;
    auto* run = app.add_subcommand("run", "Run one scenario file");
    run->add_option("scenario", scenario_path, "Scenario JSON")->required();
    add_common(run);

    std::string matrix_dir;
    int repetitions = 1;
    unsigned threads = 1;
    bool sweep = false;
    auto* matrix = app.add_subcommand("matrix", "Run every scenario in a directory");
    matrix->add_option("dir", matrix_dir, "Directory of scenario JSON files")->required();
    matrix->add_option("--repetitions", repetitions, "Repetitions per scenario (seed + r)")->check(CLI::PositiveNumber);
    matrix->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    matrix->add_flag("--sweep", sweep, "Expand each scenario over the five arbitration policies");
    add_common(matrix);
    matrix->callback([&] {
        if (!matrix->count("--format")) opt.format = "csv";
    });

    std::string demo_name;
    auto* demo = app.add_subcommand("demo", "Run a packaged scenario");
    demo->add_option("name", demo_name, "tug-of-war | unsafe-blend | negotiation-demo")
        ->required()
        ->check(CLI::IsMember({"tug-of-war", "unsafe-blend", "negotiation-demo"}));
    add_common(demo);

    ServerOptions server_options;
    SessionOptions session_options;
    std::string static_dir;
    bool hide_desire = false;
    auto* serve_cmd = app.add_subcommand("serve", "Start the live session service");
    serve_cmd->add_option("--addr", server_options.address, "Listen address");
    serve_cmd->add_option("--port", server_options.port, "Listen port (0 picks one)");
    serve_cmd->add_option("--static", static_dir, "Directory served over HTTP");
    serve_cmd->add_option("--rtf", server_options.real_time_factor, "Execution real-time factor (0 = unpaced)")
        ->check(CLI::NonNegativeNumber);
    serve_cmd->add_option("--idle-timeout", session_options.idle_timeout, "Seconds before an idle session ends")
        ->check(CLI::PositiveNumber);
    serve_cmd->add_flag("--hide-automation-desire", hide_desire, "Do not reveal the automation desire up front");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*run) return run_one(load_scenario(scenario_path), opt);
        if (*matrix) return run_matrix_dir(matrix_dir, repetitions, threads, sweep, opt);
        if (*demo) return run_one(*packaged_scenario(demo_name), opt);
        if (*serve_cmd) {
            server_options.static_dir = static_dir;
            session_options.reveal_desire = !hide_desire;
            return serve(server_options, session_options);
        }
    } catch (const ValidationFailure& e) {
        spdlog::error("{}", e.what());
        return kExitValidation;
    } catch (const SchemaError& e) {
        spdlog::error("invalid scenario: {}", e.what());
        return kExitValidation;
    } catch (const InvalidArgument& e) {
        spdlog::error("invalid scenario: {}", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return 0;
}
