// Emancipated agreement on a joint trajectory. Two interchangeable schemes:
//
//  * iterative best response (IBR): each agent alternately minimizes
//    ‖T − own desire‖² + λ‖T − other's current trajectory‖²;
//  * monotone-concession negotiation over offer parameters (goal, duration)
//    with a Zeuthen risk rule deciding who concedes.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cooptraj/human_model.hpp"
#include "cooptraj/json_io.hpp"
#include "cooptraj/planner.hpp"
#include "cooptraj/quintic.hpp"
#include "cooptraj/trajectory.hpp"

namespace cooptraj {

enum class AgreementScheme { IBR, Negotiation };
enum class Fallback { StatusQuo, Midpoint };

struct AgreementConfig {
    AgreementScheme scheme{AgreementScheme::IBR};
    double lambda{1.0};          // IBR coupling weight
    double epsilon{1e-3};        // agreement threshold [m]
    int max_rounds{100};
    double concession_step{0.5};
    double acceptance_slack{0.0};
    Fallback fallback{Fallback::StatusQuo};
    double automation_compliance{1.0};

    void validate() const {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("agreement: lambda must be > 0");
        if (!(epsilon > 0.0)) throw InvalidArgument("agreement: epsilon must be > 0");
        if (max_rounds < 1) throw InvalidArgument("agreement: max_rounds must be >= 1");
        if (!(concession_step > 0.0 && concession_step <= 1.0)) {
            throw InvalidArgument("agreement: concession_step must be in (0, 1]");
        }
        if (!(acceptance_slack >= 0.0)) throw InvalidArgument("agreement: acceptance_slack must be >= 0");
        if (!(automation_compliance >= 0.0 && automation_compliance <= 1.0)) {
            throw InvalidArgument("agreement: automation_compliance must be in [0, 1]");
        }
    }

    friend bool operator==(const AgreementConfig&, const AgreementConfig&) = default;
};

/// Closed threshold: a distance equal to epsilon counts as agreement.
[[nodiscard]] constexpr bool within_agreement(double distance, double epsilon) noexcept { return distance <= epsilon; }

// ─── Iterative best response ─────────────────────────────────────────────────

/// Sample-wise minimizer of ‖T − own‖² + λ‖T − other‖².
[[nodiscard]] inline Trajectory best_response(const Trajectory& own_desire, const Trajectory& other_current,
                                              double lambda) {
    if (!(lambda > 0.0)) throw InvalidArgument("best_response: lambda must be > 0");
    require_compatible(own_desire, other_current, "best_response");
    const double w = 1.0 / (1.0 + lambda);
    return combine(own_desire, w, other_current, lambda * w, "best_response");
}

struct BestResponseState {
    Trajectory t_H;
    Trajectory t_A;
    int round;
    double gap;   // max-pointwise distance(t_H, t_A)
    double step;  // largest change of either trajectory in the last round
};

struct IbrResult {
    BestResponseState state;
    std::vector<double> gaps;   // per round
    std::vector<double> steps;  // per round; contracts by (λ/(1+λ))² per round
    Trajectory limit_H;
    Trajectory limit_A;
    Trajectory joint;  // midpoint of the limit pair
    bool converged;
    double epsilon;
};

/// Per-round contraction factor of the H-then-A sweep.
[[nodiscard]] constexpr double ibr_contraction(double lambda) noexcept {
    const double r = lambda / (1.0 + lambda);
    return r * r;
}

[[nodiscard]] inline IbrResult run_ibr(const Trajectory& desire_H, const Trajectory& desire_A,
                                       const AgreementConfig& config) {
    config.validate();
    require_compatible(desire_H, desire_A, "run_ibr");
    const double lambda = config.lambda;

    Trajectory t_H = desire_H;
    Trajectory t_A = desire_A;
    Trajectory prev_A = desire_A;
    std::vector<double> gaps;
    std::vector<double> steps;
    bool converged = false;
    int round = 0;
    while (round < config.max_rounds) {
        ++round;
        Trajectory next_H = best_response(desire_H, t_A, lambda);
        Trajectory next_A = best_response(desire_A, next_H, lambda);
        const double step = std::max(max_distance(next_H, t_H), max_distance(next_A, t_A));
        prev_A = std::move(t_A);
        t_H = std::move(next_H);
        t_A = std::move(next_A);
        gaps.push_back(max_distance(t_H, t_A));
        steps.push_back(step);
        if (within_agreement(step, config.epsilon)) {
            converged = true;
            break;
        }
    }

    // The A-iterate is an affine contraction t_A ← c + ρ·t_A, so its limit
    // follows exactly from the last two iterates.
    const double rho = ibr_contraction(lambda);
    Trajectory limit_A = combine(t_A, 1.0, combine(t_A, 1.0, prev_A, -1.0), rho / (1.0 - rho));
    Trajectory limit_H = best_response(desire_H, limit_A, lambda);
    Trajectory joint = combine(limit_H, 0.5, limit_A, 0.5);
    BestResponseState state{t_H, t_A, round, gaps.back(), steps.back()};
    return {std::move(state), std::move(gaps), std::move(steps), std::move(limit_H), std::move(limit_A),
            std::move(joint), converged, config.epsilon};
}

// ─── Negotiation ─────────────────────────────────────────────────────────────

/// Offer parameters: goal position and motion duration.
struct Theta {
    Vec2 goal;
    double duration{1.0};

    friend bool operator==(const Theta&, const Theta&) = default;
};

[[nodiscard]] inline Theta lerp(const Theta& from, const Theta& to, double s) noexcept {
    return {from.goal + s * (to.goal - from.goal), from.duration + s * (to.duration - from.duration)};
}

[[nodiscard]] inline Theta midpoint(const Theta& a, const Theta& b) noexcept {
    return {0.5 * (a.goal + b.goal), 0.5 * (a.duration + b.duration)};
}

inline Json to_json(const Theta& t) {
    Json j;
    j["goal"] = to_json(t.goal);
    j["duration"] = t.duration;
    return j;
}

inline Theta theta_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("goal") || !j.contains("duration") || !j["duration"].is_number()) {
        throw SchemaError("theta: expected {goal: [x, y], duration}");
    }
    Theta t{vec2_from_json(j["goal"], "goal"), j["duration"].get<double>()};
    if (!t.goal.finite() || !(t.duration > 0.0) || !std::isfinite(t.duration)) {
        throw SchemaError("theta: goal must be finite and duration positive");
    }
    return t;
}

/// Maps offer parameters to compatible trajectories: a quintic from the common
/// start to the offered goal, then held until the horizon.
struct OfferSpace {
    BoundaryState start;
    double dt{0.05};
    std::size_t samples{2};

    [[nodiscard]] double horizon() const noexcept { return static_cast<double>(samples - 1) * dt; }

    [[nodiscard]] Trajectory trajectory(const Theta& theta) const {
        const double d = std::clamp(theta.duration, 2.0 * dt, horizon());
        return conform_to(quintic_point_to_point(start, BoundaryState::at_rest(theta.goal), d, dt), samples);
    }
};

/// One negotiating party. Utility u(θ) = −cost(trajectory(θ)).
struct NegotiationAgent {
    Theta desire;
    double compliance{0.5};
    std::function<double(const Trajectory&)> cost;

    [[nodiscard]] double utility(const OfferSpace& space, const Theta& theta) const {
        return -cost(space.trajectory(theta));
    }
};

/// Human party: prefers offers close (mean-squared) to its own desired motion.
[[nodiscard]] inline NegotiationAgent agent_from_profile(const HumanProfile& profile, const OfferSpace& space) {
    profile.validate();
    const Theta desire{profile.desired_goal, profile.desired_duration};
    auto reference = std::make_shared<const Trajectory>(space.trajectory(desire));
    return {desire, profile.compliance, [reference](const Trajectory& t) {
                return distance(t, *reference, MetricKind::MeanSquaredDistance).value;
            }};
}

/// Automation party: cost J of the planner's cost specification. Its desired
/// offer is the goal of J with the duration that minimizes J within the offer
/// family.
[[nodiscard]] inline NegotiationAgent agent_from_cost(const CostSpec& cost, const OfferSpace& space, double compliance) {
    cost.validate();
    constexpr int kGrid = 48;
    const double d_min = std::max(2.0 * space.dt, 0.05 * space.horizon());
    double best_d = space.horizon();
    double best_j = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid; ++i) {
        const double d = d_min + (space.horizon() - d_min) * static_cast<double>(i) / (kGrid - 1);
        const double j = evaluate_cost(space.trajectory({cost.goal, d}), cost);
        if (j < best_j) {
            best_j = j;
            best_d = d;
        }
    }
    return {{cost.goal, best_d}, compliance, [cost](const Trajectory& t) { return evaluate_cost(t, cost); }};
}

enum class NegotiationVerdict { Agreed, FallbackApplied, Exhausted };

inline const char* to_string(NegotiationVerdict v) noexcept {
    switch (v) {
        case NegotiationVerdict::Agreed: return "agreed";
        case NegotiationVerdict::FallbackApplied: return "fallback_applied";
        case NegotiationVerdict::Exhausted: return "exhausted";
    }
    return "exhausted";
}

struct NegotiationRound {
    int round;
    Theta offer_H;
    Theta offer_A;
    double u_HH;  // human's utility of its own offer
    double u_HA;  // human's utility of the automation's offer
    double u_AH;
    double u_AA;
    double risk_H;
    double risk_A;
    std::string action;
};

inline Json to_json(const NegotiationRound& r) {
    Json j;
    j["round"] = r.round;
    j["offer_H"] = to_json(r.offer_H);
    j["offer_A"] = to_json(r.offer_A);
    j["u_HH"] = r.u_HH;
    j["u_HA"] = r.u_HA;
    j["u_AH"] = r.u_AH;
    j["u_AA"] = r.u_AA;
    j["risk_H"] = r.risk_H;
    j["risk_A"] = r.risk_A;
    j["action"] = r.action;
    return j;
}

struct NegotiationSession {
    std::vector<NegotiationRound> rounds;
    NegotiationVerdict verdict{NegotiationVerdict::Exhausted};
    Theta final_H;
    Theta final_A;
    std::optional<Theta> joint_theta;
    std::optional<Trajectory> joint;
    Trajectory offer_trajectory_H;  // trajectory of the final human offer
    Trajectory offer_trajectory_A;
    double agreement_distance;  // distance between the references both agents end up following
    double epsilon;
};

/// Transcript as JSON lines (one round per line, LF-terminated).
[[nodiscard]] inline std::string transcript_jsonl(const NegotiationSession& s) {
    std::string out;
    for (const auto& r : s.rounds) {
        out += dump(to_json(r));
        out += '\n';
    }
    return out;
}

namespace detail {
inline constexpr double kTinyRisk = 1e-12;
inline constexpr double kRiskTie = 1e-12;
}  // namespace detail

/// Stateful Zeuthen monotone-concession protocol; one call to `round()` per
/// exchange of offers. Used both for batch negotiation and for live sessions
/// where the human offer arrives from outside.
class ZeuthenProtocol {
public:
    ZeuthenProtocol(NegotiationAgent human, NegotiationAgent automation, OfferSpace space, AgreementConfig config)
        : human_(std::move(human)),
          automation_(std::move(automation)),
          space_(space),
          config_(config),
          offer_H_(human_.desire),
          offer_A_(automation_.desire),
          worst_H_(human_.utility(space_, automation_.desire)),
          worst_A_(automation_.utility(space_, human_.desire)) {
        config_.validate();
        for (double c : {human_.compliance, automation_.compliance}) {
            if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("negotiation: compliance must be in [0, 1]");
        }
    }

    struct Evaluation {
        NegotiationRound record;
        bool accept_H;
        bool accept_A;
        bool close;
        Theta next_H;
        Theta next_A;
    };

    [[nodiscard]] const Theta& offer_H() const noexcept { return offer_H_; }
    [[nodiscard]] const Theta& offer_A() const noexcept { return offer_A_; }
    [[nodiscard]] const OfferSpace& space() const noexcept { return space_; }
    [[nodiscard]] const AgreementConfig& config() const noexcept { return config_; }
    [[nodiscard]] const NegotiationAgent& human() const noexcept { return human_; }
    [[nodiscard]] const NegotiationAgent& automation() const noexcept { return automation_; }
    [[nodiscard]] int rounds_played() const noexcept { return round_; }

    void set_offer_H(const Theta& t) noexcept { offer_H_ = t; }

    /// Evaluates the current offer pair without changing state.
    [[nodiscard]] Evaluation evaluate() const {
        Evaluation e{};
        auto& r = e.record;
        r.round = round_ + 1;
        r.offer_H = offer_H_;
        r.offer_A = offer_A_;
        r.u_HH = human_.utility(space_, offer_H_);
        r.u_HA = human_.utility(space_, offer_A_);
        r.u_AH = automation_.utility(space_, offer_H_);
        r.u_AA = automation_.utility(space_, offer_A_);
        r.risk_H = risk(r.u_HH, r.u_HA, worst_H_);
        r.risk_A = risk(r.u_AA, r.u_AH, worst_A_);

        const double step = config_.concession_step;
        e.next_H = lerp(offer_H_, offer_A_, step * human_.compliance);
        e.next_A = lerp(offer_A_, offer_H_, step * automation_.compliance);
        e.accept_H = r.u_HA >= human_.utility(space_, e.next_H) - config_.acceptance_slack;
        e.accept_A = r.u_AH >= automation_.utility(space_, e.next_A) - config_.acceptance_slack;
        e.close = within_agreement(max_distance(space_.trajectory(offer_H_), space_.trajectory(offer_A_)),
                                   config_.epsilon);
        return e;
    }

    /// Plays one full round; returns the record and, if reached, the joint offer.
    std::pair<NegotiationRound, std::optional<Theta>> round() {
        Evaluation e = evaluate();
        ++round_;
        auto& r = e.record;
        if (e.close || (e.accept_H && e.accept_A)) {
            r.action = "agree";
            return {r, midpoint(offer_H_, offer_A_)};
        }
        if (e.accept_H) {
            r.action = "H_accepts";
            return {r, offer_A_};
        }
        if (e.accept_A) {
            r.action = "A_accepts";
            return {r, offer_H_};
        }
        const auto who = conceder(r.risk_H, r.risk_A);
        const double s_H = config_.concession_step * human_.compliance;
        const double s_A = config_.concession_step * automation_.compliance;
        if (who == Conceder::Both && s_H + s_A > 1.0) {
            // simultaneous concessions would cross; meet in between instead
            const Theta meet = lerp(offer_H_, offer_A_, s_H / (s_H + s_A));
            offer_H_ = meet;
            offer_A_ = meet;
        } else {
            if (who != Conceder::Automation) offer_H_ = e.next_H;
            if (who != Conceder::Human) offer_A_ = e.next_A;
        }
        r.action = who == Conceder::Human ? "H_concedes" : who == Conceder::Automation ? "A_concedes" : "both_concede";
        return {r, std::nullopt};
    }

    /// Live variant: the human's offer is given; only the automation decides.
    /// Returns the automation's response and whether it accepted the offer.
    std::pair<NegotiationRound, bool> respond_to(const Theta& human_offer) {
        offer_H_ = human_offer;
        Evaluation e = evaluate();
        ++round_;
        auto& r = e.record;
        if (e.close || e.accept_A) {
            r.action = "A_accepts";
            return {r, true};
        }
        // human risk modelled from its revealed first offer
        if (conceder(r.risk_H, r.risk_A) != Conceder::Human) {
            offer_A_ = e.next_A;
            r.action = "A_concedes";
        } else {
            r.action = "A_holds";
        }
        return {r, false};
    }

private:
    enum class Conceder { Human, Automation, Both };

    static double risk(double u_own, double u_opp, double u_worst) noexcept {
        return (u_own - u_opp) / std::max(u_own - u_worst, detail::kTinyRisk);
    }

    static Conceder conceder(double risk_H, double risk_A) noexcept {
        if (std::abs(risk_H - risk_A) <= detail::kRiskTie) return Conceder::Both;
        return risk_H < risk_A ? Conceder::Human : Conceder::Automation;
    }

    NegotiationAgent human_;
    NegotiationAgent automation_;
    OfferSpace space_;
    AgreementConfig config_;
    Theta offer_H_;
    Theta offer_A_;
    double worst_H_;
    double worst_A_;
    int round_{0};
};

[[nodiscard]] inline NegotiationSession finish_session(const ZeuthenProtocol& protocol,
                                                       std::vector<NegotiationRound> rounds,
                                                       std::optional<Theta> joint) {
    const auto& cfg = protocol.config();
    NegotiationSession s{std::move(rounds),
                         NegotiationVerdict::Exhausted,
                         protocol.offer_H(),
                         protocol.offer_A(),
                         std::nullopt,
                         std::nullopt,
                         protocol.space().trajectory(protocol.offer_H()),
                         protocol.space().trajectory(protocol.offer_A()),
                         0.0,
                         cfg.epsilon};
    if (joint) {
        s.verdict = NegotiationVerdict::Agreed;
    } else if (cfg.fallback == Fallback::Midpoint) {
        s.verdict = NegotiationVerdict::FallbackApplied;
        joint = midpoint(protocol.offer_H(), protocol.offer_A());
    }
    if (joint) {
        s.joint_theta = joint;
        s.joint = protocol.space().trajectory(*joint);
        s.agreement_distance = 0.0;
    } else {
        s.agreement_distance = max_distance(s.offer_trajectory_H, s.offer_trajectory_A);
    }
    return s;
}

[[nodiscard]] inline NegotiationSession negotiate(const NegotiationAgent& human, const NegotiationAgent& automation,
                                                  const OfferSpace& space, const AgreementConfig& config) {
    ZeuthenProtocol protocol(human, automation, space, config);
    std::vector<NegotiationRound> rounds;
    std::optional<Theta> joint;
    while (protocol.rounds_played() < config.max_rounds) {
        auto [record, agreed] = protocol.round();
        rounds.push_back(std::move(record));
        if (agreed) {
            joint = agreed;
            break;
        }
    }
    return finish_session(protocol, std::move(rounds), joint);
}

// ─── Verification ────────────────────────────────────────────────────────────

/// Outcome consumed by the execution layer. When agreed, both references are
/// the same shared trajectory object.
struct AgreementVerdict {
    bool agreed;
    std::shared_ptr<const Trajectory> joint;
    double distance;
    std::shared_ptr<const Trajectory> reference_H;
    std::shared_ptr<const Trajectory> reference_A;
};

[[nodiscard]] inline AgreementVerdict verify_agreement(const IbrResult& r) {
    auto joint = std::make_shared<const Trajectory>(r.joint);
    const double d = r.state.step;
    if (within_agreement(d, r.epsilon)) return {true, joint, d, joint, joint};
    return {false, joint, d, std::make_shared<const Trajectory>(r.state.t_H),
            std::make_shared<const Trajectory>(r.state.t_A)};
}

[[nodiscard]] inline AgreementVerdict verify_agreement(const NegotiationSession& s) {
    const double d = s.agreement_distance;
    if (s.joint && within_agreement(d, s.epsilon)) {
        auto joint = std::make_shared<const Trajectory>(*s.joint);
        return {true, joint, d, joint, joint};
    }
    auto mid = std::make_shared<const Trajectory>(combine(s.offer_trajectory_H, 0.5, s.offer_trajectory_A, 0.5));
    return {false, mid, d, std::make_shared<const Trajectory>(s.offer_trajectory_H),
            std::make_shared<const Trajectory>(s.offer_trajectory_A)};
}

}  // namespace cooptraj
