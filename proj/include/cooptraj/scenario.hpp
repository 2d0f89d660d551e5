// Scenario documents: one JSON file configures a complete experiment
// (start state, human profile, automation cost, arbitration, simulation).

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cooptraj/agreement.hpp"
#include "cooptraj/arbitration.hpp"
#include "cooptraj/execution.hpp"
#include "cooptraj/human_model.hpp"
#include "cooptraj/json_io.hpp"
#include "cooptraj/planner.hpp"
#include "cooptraj/safety.hpp"

namespace cooptraj {

inline constexpr int kScenarioVersion = 1;

/// Which reference each controller tracks during execution.
enum class ReferenceMode {
    Fused,        // automation tracks the fused reference; the human tracks the joint one only when agreed
    Independent,  // each agent tracks its own desire
    Shared,       // both track the fused reference
};

struct SimConfig {
    double dt{0.05};      // trajectory sample period
    double dt_sim{0.01};  // plant integration step
    double duration{10.0};
    Gains gains_H;
    Gains gains_A;
    std::optional<double> u_max;

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct EstimationConfig {
    std::size_t window{25};  // observed samples of the human's rehearsal run
    double min_duration{0.2};
    double max_duration{10.0};

    friend bool operator==(const EstimationConfig&, const EstimationConfig&) = default;
};

struct Scenario {
    int version{kScenarioVersion};
    std::string id{"scenario"};
    BoundaryState start;
    HumanProfile human;
    CostSpec automation_cost;
    ArbitrationPolicy arbitration{LeaderFollower{}};
    std::optional<SafetyEnvelope> envelope;
    SimConfig sim;
    EstimationConfig estimation;
    ReferenceMode references{ReferenceMode::Fused};
    std::uint64_t seed{0};

    [[nodiscard]] std::size_t horizon_samples() const {
        return static_cast<std::size_t>(std::llround(automation_cost.horizon / sim.dt)) + 1;
    }

    void validate() const {
        if (version != kScenarioVersion) {
            throw SchemaError("scenario: unsupported version " + std::to_string(version));
        }
        if (!start.finite()) throw InvalidArgument("scenario: start must be finite");
        human.validate();
        automation_cost.validate();
        if (envelope) envelope->validate();
        if (!(sim.dt > 0.0) || !(sim.dt_sim > 0.0) || !(sim.duration > 0.0)) {
            throw InvalidArgument("scenario: sim.dt, sim.dt_sim and sim.duration must be positive");
        }
        const double ratio = sim.dt / sim.dt_sim;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
            throw InvalidArgument("scenario: sim.dt must be a multiple of sim.dt_sim");
        }
        if (estimation.window < 6) throw InvalidArgument("scenario: estimation.window must be >= 6");
        if (!(estimation.min_duration > 0.0) || !(estimation.max_duration > estimation.min_duration)) {
            throw InvalidArgument("scenario: invalid estimation duration range");
        }
        if (const auto* a = std::get_if<Agreement>(&arbitration)) a->config.validate();
        if (const auto* d = std::get_if<AdditiveDeforming>(&arbitration); d && !(d->mu >= 0.0)) {
            throw InvalidArgument("scenario: mu must be >= 0");
        }
    }

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

// ─── Serialization ───────────────────────────────────────────────────────────

inline const char* to_string(ReferenceMode m) noexcept {
    switch (m) {
        case ReferenceMode::Fused: return "fused";
        case ReferenceMode::Independent: return "independent";
        case ReferenceMode::Shared: return "shared";
    }
    return "fused";
}

inline ReferenceMode reference_mode_from_string(const std::string& s) {
    if (s == "fused") return ReferenceMode::Fused;
    if (s == "independent") return ReferenceMode::Independent;
    if (s == "shared") return ReferenceMode::Shared;
    throw SchemaError("references: unknown mode '" + s + "'");
}

inline Json to_json(const SafetyEnvelope& e) {
    Json j = Json::object();
    if (e.corridor) j["corridor"] = Json{{"center_y", e.corridor->center_y}, {"width", e.corridor->width}};
    Json obstacles = Json::array();
    for (const auto& d : e.obstacles) obstacles.push_back(Json{{"center", to_json(d.center)}, {"radius", d.radius}});
    j["obstacles"] = std::move(obstacles);
    return j;
}

inline SafetyEnvelope envelope_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("envelope: expected object");
    SafetyEnvelope e;
    if (j.contains("corridor") && !j["corridor"].is_null()) {
        e.corridor = Corridor{optional_field(j["corridor"], "center_y", 0.0), require<double>(j["corridor"], "width")};
    }
    if (j.contains("obstacles")) {
        for (const auto& d : j["obstacles"]) {
            e.obstacles.push_back({vec2_from_json(d.at("center"), "center"), require<double>(d, "radius")});
        }
    }
    return e;
}

inline Json to_json(const HumanProfile& h) {
    Json j;
    j["desired_goal"] = to_json(h.desired_goal);
    j["desired_duration"] = h.desired_duration;
    j["compliance"] = h.compliance;
    j["noise_std"] = h.noise_std;
    return j;
}

inline HumanProfile human_from_json(const Json& j) {
    HumanProfile h;
    h.desired_goal = vec2_from_json(j.at("desired_goal"), "desired_goal");
    h.desired_duration = require<double>(j, "desired_duration");
    h.compliance = optional_field(j, "compliance", h.compliance);
    h.noise_std = optional_field(j, "noise_std", h.noise_std);
    return h;
}

inline Json to_json(const CostSpec& c) {
    Json j;
    j["w_jerk"] = c.w_jerk;
    j["w_goal"] = c.w_goal;
    j["w_time"] = c.w_time;
    j["w_effort"] = c.w_effort;
    j["goal"] = to_json(c.goal);
    j["horizon"] = c.horizon;
    if (c.corridor) j["corridor"] = to_json(*c.corridor);
    return j;
}

inline CostSpec cost_from_json(const Json& j) {
    CostSpec c;
    c.w_jerk = optional_field(j, "w_jerk", c.w_jerk);
    c.w_goal = optional_field(j, "w_goal", c.w_goal);
    c.w_time = optional_field(j, "w_time", c.w_time);
    c.w_effort = optional_field(j, "w_effort", c.w_effort);
    c.goal = vec2_from_json(j.at("goal"), "goal");
    c.horizon = require<double>(j, "horizon");
    if (j.contains("corridor") && !j["corridor"].is_null()) c.corridor = envelope_from_json(j["corridor"]);
    return c;
}

inline Json to_json(const AgreementConfig& c) {
    Json j;
    j["scheme"] = c.scheme == AgreementScheme::IBR ? "ibr" : "negotiation";
    j["lambda"] = c.lambda;
    j["epsilon"] = c.epsilon;
    j["max_rounds"] = c.max_rounds;
    j["concession_step"] = c.concession_step;
    j["acceptance_slack"] = c.acceptance_slack;
    j["fallback"] = c.fallback == Fallback::StatusQuo ? "status_quo" : "midpoint";
    j["automation_compliance"] = c.automation_compliance;
    return j;
}

inline AgreementConfig agreement_from_json(const Json& j) {
    AgreementConfig c;
    const auto scheme = optional_field<std::string>(j, "scheme", "ibr");
    if (scheme == "ibr") {
        c.scheme = AgreementScheme::IBR;
    } else if (scheme == "negotiation") {
        c.scheme = AgreementScheme::Negotiation;
    } else {
        throw SchemaError("agreement: unknown scheme '" + scheme + "'");
    }
    c.lambda = optional_field(j, "lambda", c.lambda);
    c.epsilon = optional_field(j, "epsilon", c.epsilon);
    c.max_rounds = optional_field(j, "max_rounds", c.max_rounds);
    c.concession_step = optional_field(j, "concession_step", c.concession_step);
    c.acceptance_slack = optional_field(j, "acceptance_slack", c.acceptance_slack);
    const auto fallback = optional_field<std::string>(j, "fallback", "status_quo");
    if (fallback == "status_quo") {
        c.fallback = Fallback::StatusQuo;
    } else if (fallback == "midpoint") {
        c.fallback = Fallback::Midpoint;
    } else {
        throw SchemaError("agreement: unknown fallback '" + fallback + "'");
    }
    c.automation_compliance = optional_field(j, "automation_compliance", c.automation_compliance);
    return c;
}

inline Json to_json(const ArbitrationPolicy& policy) {
    Json j;
    j["kind"] = policy_name(policy);
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Superimposed>) {
                j["envelope"] = to_json(p.envelope);
            } else if constexpr (std::is_same_v<P, AdditiveControlled>) {
                if (p.sigma_source.is_constant() && p.sigma_source.times().front() == 0.0) {
                    j["sigma"] = p.sigma_source.values().front();
                } else {
                    j["sigma"] = Json{{"times", p.sigma_source.times()}, {"values", p.sigma_source.values()}};
                }
            } else if constexpr (std::is_same_v<P, AdditiveDeforming>) {
                j["mu"] = p.mu;
            } else if constexpr (std::is_same_v<P, Agreement>) {
                const Json config = to_json(p.config);
                for (const auto& [k, v] : config.items()) j[k] = v;
            }
        },
        policy);
    return j;
}

inline ArbitrationPolicy policy_from_json(const Json& j) {
    const auto kind = require<std::string>(j, "kind");
    if (kind == "leader_follower") return LeaderFollower{};
    if (kind == "superimposed") return Superimposed{envelope_from_json(j.at("envelope"))};
    if (kind == "additive_controlled") {
        if (!j.contains("sigma")) return AdditiveControlled{};
        const auto& s = j["sigma"];
        if (s.is_number()) return AdditiveControlled{SigmaSource::constant(s.get<double>())};
        return AdditiveControlled{SigmaSource::scripted(require<std::vector<double>>(s, "times"),
                                                        require<std::vector<double>>(s, "values"))};
    }
    if (kind == "additive_deforming") return AdditiveDeforming{optional_field(j, "mu", 1.0)};
    if (kind == "agreement") return Agreement{agreement_from_json(j)};
    throw SchemaError("arbitration: unknown kind '" + kind + "'");
}

inline Json to_json(const Scenario& s) {
    Json j;
    j["version"] = s.version;
    j["id"] = s.id;
    j["seed"] = s.seed;
    j["start"] = to_json(s.start);
    j["human"] = to_json(s.human);
    j["automation_cost"] = to_json(s.automation_cost);
    j["arbitration"] = to_json(s.arbitration);
    if (s.envelope) j["envelope"] = to_json(*s.envelope);
    Json sim;
    sim["dt"] = s.sim.dt;
    sim["dt_sim"] = s.sim.dt_sim;
    sim["duration"] = s.sim.duration;
    sim["gains"] = Json{{"human", Json{{"kp", s.sim.gains_H.kp}, {"kd", s.sim.gains_H.kd}}},
                        {"automation", Json{{"kp", s.sim.gains_A.kp}, {"kd", s.sim.gains_A.kd}}}};
    if (s.sim.u_max) sim["u_max"] = *s.sim.u_max;
    j["sim"] = std::move(sim);
    j["estimation"] = Json{{"window", s.estimation.window},
                           {"duration_range", Json::array({s.estimation.min_duration, s.estimation.max_duration})}};
    j["references"] = to_string(s.references);
    return j;
}

inline Gains gains_from_json(const Json& j, Gains fallback) {
    if (!j.is_object()) return fallback;
    return {optional_field(j, "kp", fallback.kp), optional_field(j, "kd", fallback.kd)};
}

inline Scenario scenario_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("scenario: expected a JSON object");
    try {
        Scenario s;
        s.version = require<int>(j, "version");
        if (s.version != kScenarioVersion) throw SchemaError("scenario: unsupported version " + std::to_string(s.version));
        s.id = optional_field<std::string>(j, "id", s.id);
        s.seed = optional_field<std::uint64_t>(j, "seed", 0);
        s.start = boundary_from_json(j.at("start"));
        s.human = human_from_json(j.at("human"));
        s.automation_cost = cost_from_json(j.at("automation_cost"));
        s.arbitration = policy_from_json(j.at("arbitration"));
        if (j.contains("envelope") && !j["envelope"].is_null()) s.envelope = envelope_from_json(j["envelope"]);
        if (j.contains("sim")) {
            const auto& sim = j["sim"];
            s.sim.dt = optional_field(sim, "dt", s.sim.dt);
            s.sim.dt_sim = optional_field(sim, "dt_sim", s.sim.dt_sim);
            s.sim.duration = optional_field(sim, "duration", s.sim.duration);
            if (sim.contains("gains")) {
                s.sim.gains_H = gains_from_json(sim["gains"].value("human", Json()), s.sim.gains_H);
                s.sim.gains_A = gains_from_json(sim["gains"].value("automation", Json()), s.sim.gains_A);
            }
            if (sim.contains("u_max") && !sim["u_max"].is_null()) s.sim.u_max = sim["u_max"].get<double>();
        }
        if (j.contains("estimation")) {
            const auto& e = j["estimation"];
            s.estimation.window = optional_field<std::size_t>(e, "window", s.estimation.window);
            if (e.contains("duration_range")) {
                const auto r = e["duration_range"].get<std::vector<double>>();
                if (r.size() != 2) throw SchemaError("estimation.duration_range: expected [min, max]");
                s.estimation.min_duration = r[0];
                s.estimation.max_duration = r[1];
            }
        }
        s.references = reference_mode_from_string(optional_field<std::string>(j, "references", "fused"));
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("scenario: ") + e.what());
    }
}

}  // namespace cooptraj
