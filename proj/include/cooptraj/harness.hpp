// Scenario orchestration: plan → observe the human → estimate → arbitrate →
// execute, plus batch matrices and the packaged demo scenarios.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "cooptraj/agreement.hpp"
#include "cooptraj/arbitration.hpp"
#include "cooptraj/execution.hpp"
#include "cooptraj/human_model.hpp"
#include "cooptraj/planner.hpp"
#include "cooptraj/scenario.hpp"

namespace cooptraj {

/// Error raised while running a scenario; carries the scenario id.
struct ScenarioError : std::runtime_error {
    ScenarioError(const std::string& scenario, const std::string& what)
        : std::runtime_error("scenario '" + scenario + "': " + what), scenario(scenario) {}
    std::string scenario;
};

struct AgreementSummary {
    std::string scheme;
    std::string verdict;  // agreed | fallback_applied | exhausted | converged | not_converged
    bool agreed;
    int rounds;
    double distance;
};

struct RunReport {
    std::string scenario_id;
    std::uint64_t seed;
    std::string policy;
    ReferenceMode references;
    double planner_cost;
    EstimatedDesire estimate;
    bool safe;
    bool trigger;
    double min_clearance;
    std::optional<AgreementSummary> agreement;
    std::string transcript;  // negotiation JSON lines, empty otherwise
    ExecutionTrace trace;
    ConflictSummary summary;
    double wall_time;  // seconds; excluded from deterministic serializations
};

namespace detail {

/// Rehearsal run of the human alone tracking its own desire; returns noisy
/// position observations every dt.
inline std::vector<Observation> observe_human(const Scenario& s, const Trajectory& desire, std::uint64_t seed) {
    const auto per_sample = static_cast<std::size_t>(std::llround(s.sim.dt / s.sim.dt_sim));
    const std::size_t count = std::min(s.estimation.window, desire.size());
    const Controller human(s.sim.gains_H, desire, s.sim.u_max);
    Plant plant{{s.start.p, s.start.v}, s.sim.dt_sim};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Observation> out;
    out.reserve(count);
    for (std::size_t k = 0; out.size() < count; ++k) {
        const double t = static_cast<double>(k) * s.sim.dt_sim;
        const Vec2 u = human.command(plant.x, t);
        if (k % per_sample == 0) {
            State observed = plant.x;
            observed.p += s.human.noise_std * Vec2{noise(rng), noise(rng)};
            out.push_back({static_cast<double>(out.size()) * s.sim.dt, observed, u});
        }
        plant.step(u);
    }
    return out;
}

}  // namespace detail

[[nodiscard]] inline RunReport run_scenario_unchecked(const Scenario& s) {
    const auto started = std::chrono::steady_clock::now();
    s.validate();
    const std::size_t n = s.horizon_samples();
    const double dt = s.sim.dt;

    // 1-2. automation desire
    const PlannerOutput planned = plan(s.start, s.automation_cost, dt);
    const Trajectory& t_auto = planned.trajectory;

    // 3. human desire (hidden) and its estimate from observed behavior
    const Trajectory truth_H = conform_to(human_desire(s.human, s.start, dt), n);
    const auto observations = detail::observe_human(s, truth_H, s.seed);
    // the human's action-level law is assumed known; its reference is not
    std::optional<TrackingModel> tracking;
    if (!s.sim.u_max) tracking = TrackingModel{s.sim.gains_H.kp, s.sim.gains_H.kd};
    EstimatedDesire estimate =
        estimate_desire(observations, dt, {s.estimation.min_duration, s.estimation.max_duration}, tracking);
    const Trajectory t_human_est = conform_to(estimate.trajectory, n);

    // 4. arbitration
    ArbitrationContext ctx;
    ctx.envelope = s.envelope ? s.envelope : s.automation_cost.corridor;
    const OfferSpace space{s.start, dt, n};
    const auto* agreement_policy = std::get_if<Agreement>(&s.arbitration);
    if (agreement_policy && agreement_policy->config.scheme == AgreementScheme::Negotiation) {
        ctx.parties = NegotiationParties{agent_from_profile(s.human, space),
                                         agent_from_cost(s.automation_cost, space,
                                                         agreement_policy->config.automation_compliance),
                                         space};
    }
    HumanInput human_input = t_human_est;
    if (std::holds_alternative<AdditiveDeforming>(s.arbitration)) {
        const std::size_t mid = n / 2;
        const Vec2 force = t_human_est[mid].p - t_auto[mid].p;
        human_input = DeformationDesire{deformation_desire(t_auto, force, mid)};
    }
    FusionResult fusion = arbitrate(s.arbitration, t_auto, human_input, ctx);

    // references
    auto fused = std::make_shared<const Trajectory>(fusion.trajectory);
    std::shared_ptr<const Trajectory> ref_H = std::make_shared<const Trajectory>(truth_H);
    std::shared_ptr<const Trajectory> ref_A = fused;
    std::optional<AgreementSummary> agreement;
    std::string transcript;
    if (fusion.agreement) {
        const AgreementVerdict verdict = std::visit([](const auto& o) { return verify_agreement(o); }, *fusion.agreement);
        if (const auto* ibr = std::get_if<IbrResult>(&*fusion.agreement)) {
            agreement = AgreementSummary{"ibr", ibr->converged ? "converged" : "not_converged", verdict.agreed,
                                         ibr->state.round, verdict.distance};
        } else {
            const auto& session = std::get<NegotiationSession>(*fusion.agreement);
            agreement = AgreementSummary{"negotiation", to_string(session.verdict), verdict.agreed,
                                         static_cast<int>(session.rounds.size()), verdict.distance};
            transcript = transcript_jsonl(session);
        }
        if (verdict.agreed) {
            ref_A = verdict.reference_A;
            if (s.references == ReferenceMode::Fused) ref_H = verdict.reference_H;
        }
    }
    switch (s.references) {
        case ReferenceMode::Independent: ref_A = std::make_shared<const Trajectory>(t_auto); break;
        case ReferenceMode::Shared: ref_H = ref_A; break;
        case ReferenceMode::Fused: break;
    }

    // 5. execution
    const Controller ctrl_H(s.sim.gains_H, ref_H, s.sim.u_max);
    const Controller ctrl_A(s.sim.gains_A, ref_A, s.sim.u_max);
    ExecutionTrace trace = simulate(Plant{{s.start.p, s.start.v}, s.sim.dt_sim}, ctrl_H, ctrl_A, s.sim.duration);
    const ConflictSummary summary = conflict_report(trace, &truth_H, &t_auto);

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {s.id,
            s.seed,
            policy_name(s.arbitration),
            s.references,
            planned.cost,
            std::move(estimate),
            fusion.safe,
            fusion.trigger,
            fusion.min_clearance,
            std::move(agreement),
            std::move(transcript),
            std::move(trace),
            summary,
            wall};
}

/// Runs one scenario; module errors are rethrown with the scenario id.
[[nodiscard]] inline RunReport run_scenario(const Scenario& s) {
    try {
        return run_scenario_unchecked(s);
    } catch (const SchemaError&) {
        throw;
    } catch (const InvalidArgument&) {
        throw;
    } catch (const std::exception& e) {
        throw ScenarioError(s.id, e.what());
    }
}

inline Json to_json(const RunReport& r, bool include_timing = false) {
    Json j;
    j["scenario"] = r.scenario_id;
    j["seed"] = r.seed;
    j["policy"] = r.policy;
    j["references"] = to_string(r.references);
    j["planner_cost"] = r.planner_cost;
    j["estimate"] = Json{{"goal", to_json(r.estimate.goal_estimate)},
                         {"duration", r.estimate.duration_estimate},
                         {"residual", r.estimate.residual},
                         {"degenerate", r.estimate.degenerate}};
    j["fusion"] = Json{{"safe", r.safe},
                       {"trigger", r.trigger},
                       {"min_clearance", std::isfinite(r.min_clearance) ? Json(r.min_clearance) : Json(nullptr)}};
    if (r.agreement) {
        j["agreement"] = Json{{"scheme", r.agreement->scheme},
                              {"verdict", r.agreement->verdict},
                              {"agreed", r.agreement->agreed},
                              {"rounds", r.agreement->rounds},
                              {"distance", r.agreement->distance}};
    } else {
        j["agreement"] = nullptr;
    }
    j["execution"] = to_json(r.summary);
    if (include_timing) j["wall_time"] = r.wall_time;
    return j;
}

// ─── Matrix ──────────────────────────────────────────────────────────────────

struct MatrixRow {
    std::string scenario;
    std::string policy;
    std::string references;
    int repetition;
    std::uint64_t seed;
    std::string status;  // ok | failed
    bool agreed;
    int rounds;
    bool safe;
    bool trigger;
    double mean_conflict;
    double max_conflict;
    double steady_state_conflict;
    double energy_H;
    double energy_A;
    std::string error;

    friend bool operator==(const MatrixRow&, const MatrixRow&) = default;
};

[[nodiscard]] inline MatrixRow summary_row(const RunReport& r, int repetition = 0) {
    return {r.scenario_id,
            r.policy,
            to_string(r.references),
            repetition,
            r.seed,
            "ok",
            r.agreement ? r.agreement->agreed : false,
            r.agreement ? r.agreement->rounds : 0,
            r.safe,
            r.trigger,
            r.summary.mean_conflict,
            r.summary.max_conflict,
            r.summary.steady_state_conflict,
            r.summary.energy_H,
            r.summary.energy_A,
            ""};
}

inline constexpr const char* kMatrixCsvHeader =
    "scenario,policy,references,repetition,seed,status,agreed,rounds,safe,trigger,mean_conflict,max_conflict,"
    "steady_state_conflict,energy_H,energy_A,error";

namespace detail {
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}
}  // namespace detail

[[nodiscard]] inline std::string matrix_csv(const std::vector<MatrixRow>& rows) {
    std::string out = kMatrixCsvHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += detail::csv_field(r.scenario) + ',' + r.policy + ',' + r.references + ',' + std::to_string(r.repetition) +
               ',' + std::to_string(r.seed) + ',' + r.status + ',' + (r.agreed ? "1" : "0") + ',' +
               std::to_string(r.rounds) + ',' + (r.safe ? "1" : "0") + ',' + (r.trigger ? "1" : "0") + ',' +
               format_double(r.mean_conflict) + ',' + format_double(r.max_conflict) + ',' +
               format_double(r.steady_state_conflict) + ',' + format_double(r.energy_H) + ',' +
               format_double(r.energy_A) + ',' + detail::csv_field(r.error) + '\n';
    }
    return out;
}

/// Runs every (scenario, repetition) pair; repetition r uses seed + r.
/// Failures become "failed" rows. Row order follows the input regardless of
/// completion order.
[[nodiscard]] inline std::vector<MatrixRow> run_matrix(const std::vector<Scenario>& scenarios, int repetitions,
                                                       unsigned threads = 1) {
    if (scenarios.empty()) throw InvalidArgument("run_matrix: no scenarios");
    if (repetitions < 1) throw InvalidArgument("run_matrix: repetitions must be >= 1");
    const std::size_t jobs = scenarios.size() * static_cast<std::size_t>(repetitions);
    std::vector<MatrixRow> rows(jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t job = next++; job < jobs; job = next++) {
            const auto& base = scenarios[job / static_cast<std::size_t>(repetitions)];
            const int rep = static_cast<int>(job % static_cast<std::size_t>(repetitions));
            Scenario s = base;
            s.seed = base.seed + static_cast<std::uint64_t>(rep);
            try {
                rows[job] = summary_row(run_scenario(s), rep);
            } catch (const std::exception& e) {
                rows[job] = MatrixRow{s.id, policy_name(s.arbitration), to_string(s.references), rep, s.seed, "failed",
                                      false, 0, false, false, 0, 0, 0, 0, 0, e.what()};
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs)));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

struct PolicyAggregate {
    std::string policy;
    int runs;
    int failed;
    double mean_steady_state_conflict;
    double mean_rounds;
    int safety_violations;
};

/// Per-policy aggregates in first-appearance order.
[[nodiscard]] inline std::vector<PolicyAggregate> aggregate_by_policy(const std::vector<MatrixRow>& rows) {
    std::vector<PolicyAggregate> out;
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& a) { return a.policy == r.policy; });
        if (it == out.end()) {
            out.push_back({r.policy, 0, 0, 0, 0, 0});
            it = std::prev(out.end());
        }
        ++it->runs;
        if (r.status != "ok") {
            ++it->failed;
            continue;
        }
        it->mean_steady_state_conflict += r.steady_state_conflict;
        it->mean_rounds += r.rounds;
        if (!r.safe) ++it->safety_violations;
    }
    for (auto& a : out) {
        const int ok = a.runs - a.failed;
        if (ok > 0) {
            a.mean_steady_state_conflict /= ok;
            a.mean_rounds /= ok;
        }
    }
    return out;
}

[[nodiscard]] inline std::string aggregate_csv(const std::vector<PolicyAggregate>& rows) {
    std::string out = "policy,runs,failed,mean_steady_state_conflict,mean_rounds,safety_violations\n";
    for (const auto& a : rows) {
        out += a.policy + ',' + std::to_string(a.runs) + ',' + std::to_string(a.failed) + ',' +
               format_double(a.mean_steady_state_conflict) + ',' + format_double(a.mean_rounds) + ',' +
               std::to_string(a.safety_violations) + '\n';
    }
    return out;
}

// ─── Packaged scenarios ──────────────────────────────────────────────────────

/// Human wants (+1, 0), automation (−1, 0); each tracks its own desire.
[[nodiscard]] inline Scenario tug_of_war_scenario() {
    Scenario s;
    s.id = "tug-of-war";
    s.start = BoundaryState::at_rest({0.0, 0.0});
    s.human = {{1.0, 0.0}, 2.0, 0.5, 0.01};
    s.automation_cost.w_jerk = 1.0;
    s.automation_cost.w_goal = 1e6;
    s.automation_cost.goal = {-1.0, 0.0};
    s.automation_cost.horizon = 4.0;
    s.arbitration = LeaderFollower{};
    s.sim = {0.05, 0.01, 20.0, {4.0, 4.0}, {4.0, 4.0}, std::nullopt};
    s.estimation = {25, 0.2, 10.0};
    s.references = ReferenceMode::Independent;
    s.seed = 1;
    return s;
}

/// Two safe desires passing on either side of a disc; their σ = 0.5 blend
/// runs through it.
[[nodiscard]] inline Scenario unsafe_blend_scenario() {
    Scenario s;
    s.id = "unsafe-blend";
    s.start = BoundaryState::at_rest({-4.0, 0.0});
    s.human = {{4.0, 3.0}, 4.0, 0.5, 0.0};
    s.automation_cost.w_jerk = 1.0;
    s.automation_cost.w_goal = 1e6;
    s.automation_cost.goal = {4.0, -3.0};
    s.automation_cost.horizon = 4.0;
    s.arbitration = AdditiveControlled{SigmaSource::constant(0.5)};
    s.envelope = SafetyEnvelope{std::nullopt, {Disc{{0.0, 0.0}, 0.5}}};
    s.sim = {0.05, 0.01, 8.0, {4.0, 4.0}, {4.0, 4.0}, std::nullopt};
    s.estimation = {61, 0.2, 10.0};
    s.references = ReferenceMode::Fused;
    s.seed = 2;
    return s;
}

/// Live-negotiation style scenario with differing lateral goals.
[[nodiscard]] inline Scenario negotiation_demo_scenario() {
    Scenario s;
    s.id = "negotiation-demo";
    s.start = BoundaryState::at_rest({0.0, 0.0});
    s.human = {{4.0, 1.0}, 3.0, 0.5, 0.01};
    s.automation_cost.w_jerk = 1.0;
    s.automation_cost.w_goal = 100.0;
    s.automation_cost.goal = {4.0, -1.0};
    s.automation_cost.horizon = 4.0;
    AgreementConfig cfg;
    cfg.scheme = AgreementScheme::Negotiation;
    cfg.epsilon = 1e-3;
    cfg.max_rounds = 60;
    cfg.concession_step = 0.5;
    cfg.fallback = Fallback::Midpoint;
    cfg.automation_compliance = 0.5;
    s.arbitration = Agreement{cfg};
    s.sim = {0.05, 0.01, 10.0, {4.0, 4.0}, {4.0, 4.0}, std::nullopt};
    s.estimation = {25, 0.2, 10.0};
    s.references = ReferenceMode::Fused;
    s.seed = 3;
    return s;
}

[[nodiscard]] inline std::optional<Scenario> packaged_scenario(const std::string& name) {
    if (name == "tug-of-war") return tug_of_war_scenario();
    if (name == "unsafe-blend") return unsafe_blend_scenario();
    if (name == "negotiation-demo") return negotiation_demo_scenario();
    return std::nullopt;
}

/// The same scenario under each of the five arbitration structures, executed
/// with fused references.
[[nodiscard]] inline std::vector<Scenario> policy_sweep(const Scenario& base) {
    SafetyEnvelope envelope = base.envelope.value_or(SafetyEnvelope{Corridor{0.0, 10.0}, {}});
    AgreementConfig agreement;
    agreement.scheme = AgreementScheme::Negotiation;
    agreement.fallback = Fallback::Midpoint;
    const ArbitrationPolicy policies[] = {LeaderFollower{}, Superimposed{envelope},
                                          AdditiveControlled{SigmaSource::constant(0.5)}, AdditiveDeforming{1.0},
                                          Agreement{agreement}};
    std::vector<Scenario> out;
    for (const auto& p : policies) {
        Scenario s = base;
        s.arbitration = p;
        s.references = ReferenceMode::Fused;
        s.id = base.id + "/" + policy_name(p);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace cooptraj
