// Fusion of the automation's desired trajectory and the estimated human desire
// into the reference executed by the coupled system.

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "cooptraj/agreement.hpp"
#include "cooptraj/safety.hpp"
#include "cooptraj/trajectory.hpp"

namespace cooptraj {

/// Source of the attention weight σ ∈ [0, 1]: a constant or a scripted
/// zero-order-hold time series sampled at call time.
class SigmaSource {
public:
    static SigmaSource constant(double sigma) { return SigmaSource({0.0}, {sigma}); }
    static SigmaSource scripted(std::vector<double> times, std::vector<double> values) {
        return SigmaSource(std::move(times), std::move(values));
    }

    [[nodiscard]] double at(double t) const noexcept {
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return values_.front();
        return values_[static_cast<std::size_t>(std::distance(times_.begin(), it)) - 1];
    }

    [[nodiscard]] bool is_constant() const noexcept { return values_.size() == 1; }
    [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    friend bool operator==(const SigmaSource&, const SigmaSource&) = default;

private:
    SigmaSource(std::vector<double> times, std::vector<double> values)
        : times_(std::move(times)), values_(std::move(values)) {
        if (times_.empty() || times_.size() != values_.size()) {
            throw InvalidArgument("sigma: times and values must be non-empty and of equal length");
        }
        if (!std::is_sorted(times_.begin(), times_.end())) throw InvalidArgument("sigma: times must be sorted");
        for (double v : values_) {
            if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("sigma: values must lie in [0, 1]");
        }
    }

    std::vector<double> times_;
    std::vector<double> values_;
};

// ─── Policies ────────────────────────────────────────────────────────────────
struct LeaderFollower {
    friend bool operator==(const LeaderFollower&, const LeaderFollower&) = default;
};
struct Superimposed {
    SafetyEnvelope envelope;
    friend bool operator==(const Superimposed&, const Superimposed&) = default;
};
struct AdditiveControlled {
    SigmaSource sigma_source = SigmaSource::constant(0.5);
    friend bool operator==(const AdditiveControlled&, const AdditiveControlled&) = default;
};
struct AdditiveDeforming {
    double mu{1.0};
    friend bool operator==(const AdditiveDeforming&, const AdditiveDeforming&) = default;
};
struct Agreement {
    AgreementConfig config;
    friend bool operator==(const Agreement&, const Agreement&) = default;
};

using ArbitrationPolicy = std::variant<LeaderFollower, Superimposed, AdditiveControlled, AdditiveDeforming, Agreement>;

inline const char* policy_name(const ArbitrationPolicy& p) noexcept {
    switch (p.index()) {
        case 0: return "leader_follower";
        case 1: return "superimposed";
        case 2: return "additive_controlled";
        case 3: return "additive_deforming";
        default: return "agreement";
    }
}

/// Displacement desire Δ𝔗̂_H consumed by the additive-deforming policy.
struct DeformationDesire {
    Trajectory displacement;
};

using HumanInput = std::variant<Trajectory, DeformationDesire>;

/// Parties for the negotiation scheme of the agreement policy.
struct NegotiationParties {
    NegotiationAgent human;
    NegotiationAgent automation;
    OfferSpace space;
};

struct ArbitrationContext {
    double time{0.0};                           // σ sampling instant
    std::optional<SafetyEnvelope> envelope;     // scenario-level envelope for the safety verdict
    std::optional<NegotiationParties> parties;  // required by Agreement{Negotiation}
};

using AgreementOutcome = std::variant<IbrResult, NegotiationSession>;

struct FusionResult {
    Trajectory trajectory;
    bool safe;
    bool trigger;  // superimposed correction fired
    double min_clearance;
    std::optional<AgreementOutcome> agreement;
};

namespace detail {

inline Trajectory project_trajectory(const Trajectory& t, const SafetyEnvelope& envelope) {
    std::vector<Vec2> positions(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) positions[i] = project_to_envelope(t[i].p, envelope);
    return Trajectory(t.dt(), with_fd_velocities(positions, t.dt()));
}

inline const Trajectory& human_trajectory(const HumanInput& input, const char* policy) {
    if (const auto* t = std::get_if<Trajectory>(&input)) return *t;
    throw InvalidArgument(std::string("arbitrate: displacement desire supplied to ") + policy);
}

}  // namespace detail

[[nodiscard]] inline FusionResult arbitrate(const ArbitrationPolicy& policy, const Trajectory& t_auto,
                                            const HumanInput& human, const ArbitrationContext& context = {}) {
    const std::optional<SafetyEnvelope>* verdict_env = &context.envelope;
    std::optional<SafetyEnvelope> policy_env;
    bool trigger = false;
    std::optional<AgreementOutcome> agreement;

    auto fused = std::visit(
        [&](const auto& p) -> Trajectory {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, AdditiveDeforming>) {
                if (!(p.mu >= 0.0)) throw InvalidArgument("arbitrate: mu must be >= 0");
                const auto* delta = std::get_if<DeformationDesire>(&human);
                if (delta == nullptr) throw InvalidArgument("arbitrate: additive_deforming needs a displacement desire");
                return combine(t_auto, 1.0, delta->displacement, p.mu, "arbitrate");
            } else {
                const Trajectory& t_human = detail::human_trajectory(human, policy_name(policy));
                require_compatible(t_auto, t_human, "arbitrate");
                if constexpr (std::is_same_v<P, LeaderFollower>) {
                    return t_human;
                } else if constexpr (std::is_same_v<P, AdditiveControlled>) {
                    const double sigma = p.sigma_source.at(context.time);
                    return combine(t_human, sigma, t_auto, 1.0 - sigma, "arbitrate");
                } else if constexpr (std::is_same_v<P, Superimposed>) {
                    p.envelope.validate();
                    policy_env = p.envelope;
                    verdict_env = &policy_env;
                    if (check_safety(t_human, p.envelope).safe) return t_human;
                    trigger = true;
                    return detail::project_trajectory(t_human, p.envelope);
                } else {
                    p.config.validate();
                    if (p.config.scheme == AgreementScheme::IBR) {
                        auto r = run_ibr(t_human, t_auto, p.config);
                        Trajectory joint = r.joint;
                        agreement = std::move(r);
                        return joint;
                    }
                    if (!context.parties) throw InvalidArgument("arbitrate: negotiation requires negotiation parties");
                    const auto& parties = *context.parties;
                    auto s = negotiate(parties.human, parties.automation, parties.space, p.config);
                    Trajectory joint = s.joint ? *s.joint : t_auto;
                    agreement = std::move(s);
                    return joint;
                }
            }
        },
        policy);

    bool safe = true;
    double clearance = std::numeric_limits<double>::infinity();
    if (*verdict_env) {
        const auto report = check_safety(fused, **verdict_env);
        safe = report.safe;
        clearance = report.min_clearance;
    }
    return {std::move(fused), safe, trigger, clearance, std::move(agreement)};
}

}  // namespace cooptraj
