// Simulated human agent and estimation of the human's trajectory desire from
// observed behavior.

#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cooptraj/quintic.hpp"
#include "cooptraj/trajectory.hpp"

namespace cooptraj {

struct HumanProfile {
    Vec2 desired_goal;
    double desired_duration{1.0};
    double compliance{0.5};  // share of the concession step this agent is willing to make per round
    double noise_std{0.0};   // observation noise on positions [m]

    void validate() const {
        if (!desired_goal.finite()) throw InvalidArgument("human: desired_goal must be finite");
        if (!(desired_duration > 0.0) || !std::isfinite(desired_duration)) {
            throw InvalidArgument("human: desired_duration must be positive");
        }
        if (!(compliance >= 0.0 && compliance <= 1.0)) throw InvalidArgument("human: compliance must be in [0, 1]");
        if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw InvalidArgument("human: noise_std must be >= 0");
    }

    friend bool operator==(const HumanProfile&, const HumanProfile&) = default;
};

struct Observation {
    double time{0};
    State state;
    std::optional<Vec2> control;
};

struct DurationRange {
    double min{0.1};
    double max{10.0};
};

struct EstimatedDesire {
    Trajectory trajectory;  // starts at the window's first observation time
    Vec2 goal_estimate;
    double duration_estimate;  // remaining motion time from the window start [s]
    double residual;           // RMS position fit error [m]
    bool degenerate;
};

/// Ground-truth desire of the simulated human: a quintic from `start` to the
/// desired goal (at rest) over the desired duration.
[[nodiscard]] inline Trajectory human_desire(const HumanProfile& profile, const BoundaryState& start, double dt) {
    profile.validate();
    return quintic_point_to_point(start, BoundaryState::at_rest(profile.desired_goal), profile.desired_duration, dt);
}

/// Action-level model of the observed human used to reconstruct its
/// reference: u = −kp (p − p_ref) − kd (v − v_ref).
struct TrackingModel {
    double kp{4.0};
    double kd{4.0};
};

namespace detail {

// Model for the estimator: quintic from (p0, v0, a0) to (goal, rest) over
// `duration`, held at the goal afterwards. Affine in (a0, goal).
struct AxisSample {
    double p;
    double v;
};

inline AxisSample quintic_axis_at(double p0, double v0, double a0, double goal, double duration, double tau) {
    if (tau >= duration) return {goal, 0.0};
    const QuinticSegment seg({{p0, 0}, {v0, 0}, {a0, 0}}, {{goal, 0}, {}, {}}, duration);
    const auto k = seg.evaluate(tau);
    return {k.p.x, k.v.x};
}

struct AffineFit {
    double a0;
    double goal;
};

struct DurationFit {
    std::array<AffineFit, 2> axes;
    double sse;
};

// Without a tracking model the observed positions are fitted directly. With
// one, the signal kp·p_ref + kd·v_ref = u + kp·p + kd·v reconstructed from
// each observation is fitted instead.
inline DurationFit fit_for_duration(std::span<const Observation> window, double duration,
                                    const std::optional<TrackingModel>& model) {
    DurationFit out{};
    const State first = window.front().state;
    const double t0 = window.front().time;
    const double wp = model ? model->kp : 1.0;
    const double wv = model ? model->kd : 0.0;
    auto signal = [&](AxisSample s) { return wp * s.p + wv * s.v; };
    for (std::size_t axis = 0; axis < 2; ++axis) {
        const double p0 = first.p[axis];
        const double v0 = first.v[axis];
        auto observed = [&](const Observation& o) {
            if (!model) return o.state.p[axis];
            return (*o.control)[axis] + wp * o.state.p[axis] + wv * o.state.v[axis];
        };
        // normal equations for y ≈ base + a·ca + g·cg
        double saa = 0, sag = 0, sgg = 0, say = 0, sgy = 0;
        for (const auto& o : window) {
            const double tau = o.time - t0;
            const double base = signal(quintic_axis_at(p0, v0, 0.0, 0.0, duration, tau));
            const double ca = signal(quintic_axis_at(p0, v0, 1.0, 0.0, duration, tau)) - base;
            const double cg = signal(quintic_axis_at(p0, v0, 0.0, 1.0, duration, tau)) - base;
            const double y = observed(o) - base;
            saa += ca * ca;
            sag += ca * cg;
            sgg += cg * cg;
            say += ca * y;
            sgy += cg * y;
        }
        const double det = saa * sgg - sag * sag;
        AffineFit f{};
        if (std::abs(det) > 1e-14 * std::max(1.0, saa * sgg)) {
            f.a0 = (sgg * say - sag * sgy) / det;
            f.goal = (saa * sgy - sag * say) / det;
        } else {
            f.a0 = 0.0;
            f.goal = sgg > 0 ? sgy / sgg : p0;
        }
        for (const auto& o : window) {
            const double r =
                (signal(quintic_axis_at(p0, v0, f.a0, f.goal, duration, o.time - t0)) - observed(o)) / wp;
            out.sse += r * r;
        }
        out.axes[axis] = f;
    }
    return out;
}

}  // namespace detail

/// Least-squares fit of (goal, remaining duration) of a quintic anchored at the
/// window's first observed state. The initial acceleration is fitted jointly
/// since observations carry no acceleration. When a tracking model is given
/// and every observation carries the human's control, the human's reference
/// is reconstructed from (state, control) and fitted instead of the positions.
[[nodiscard]] inline EstimatedDesire estimate_desire(std::span<const Observation> window, double dt,
                                                     DurationRange range,
                                                     std::optional<TrackingModel> model = std::nullopt) {
    if (window.size() < 6) throw InvalidArgument("estimate_desire: window needs at least 6 samples");
    if (!(dt > 0.0)) throw InvalidArgument("estimate_desire: dt must be positive");
    if (!(range.min > 0.0) || !(range.max > range.min)) throw InvalidArgument("estimate_desire: invalid duration range");
    const double tol = 1e-6 * dt + 1e-12;
    for (std::size_t i = 1; i < window.size(); ++i) {
        if (std::abs(window[i].time - window[i - 1].time - dt) > tol) {
            throw InvalidArgument("estimate_desire: observation times must be uniform with spacing dt");
        }
    }
    if (model) {
        if (!(model->kp > 0.0) || !(model->kd >= 0.0)) throw InvalidArgument("estimate_desire: invalid tracking model");
        for (const auto& o : window) {
            if (!o.control) {
                model.reset();
                break;
            }
        }
    }

    bool moving = false;
    for (const auto& o : window) moving = moving || o.state.v.norm() >= 1e-6;
    if (!moving) {
        const Vec2 here = window.back().state.p;
        const auto steps = QuinticSegment::sample_steps(range.max, dt);
        return {Trajectory::constant(dt, std::max<std::size_t>(steps, 1) + 1, {here, {}}), here, range.max, 0.0, true};
    }

    // coarse scan, then golden-section in the best bracket
    constexpr std::size_t kGrid = 64;
    auto sse = [&](double d) { return detail::fit_for_duration(window, d, model).sse; };
    std::size_t best = 0;
    double best_sse = std::numeric_limits<double>::infinity();
    std::array<double, kGrid> grid{};
    for (std::size_t i = 0; i < kGrid; ++i) {
        grid[i] = range.min + (range.max - range.min) * static_cast<double>(i) / static_cast<double>(kGrid - 1);
        const double s = sse(grid[i]);
        if (s < best_sse) {
            best_sse = s;
            best = i;
        }
    }
    double lo = grid[best == 0 ? 0 : best - 1];
    double hi = grid[best + 1 == kGrid ? kGrid - 1 : best + 1];
    constexpr double kInvPhi = 0.6180339887498949;
    double a = hi - kInvPhi * (hi - lo);
    double b = lo + kInvPhi * (hi - lo);
    double fa = sse(a);
    double fb = sse(b);
    for (int it = 0; it < 200 && (hi - lo) > 1e-13 * hi; ++it) {
        if (fa <= fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - kInvPhi * (hi - lo);
            fa = sse(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + kInvPhi * (hi - lo);
            fb = sse(b);
        }
    }
    double duration = 0.5 * (lo + hi);
    if (best_sse < sse(duration)) duration = grid[best];

    const auto fit = detail::fit_for_duration(window, duration, model);
    const State first = window.front().state;
    const Vec2 goal{fit.axes[0].goal, fit.axes[1].goal};
    const Vec2 a0{fit.axes[0].a0, fit.axes[1].a0};
    const double rms = std::sqrt(fit.sse / static_cast<double>(window.size()));
    const Trajectory traj = duration >= 2.0 * dt
                                ? QuinticSegment({first.p, first.v, a0}, BoundaryState::at_rest(goal), duration).sample(dt)
                                : Trajectory::constant(dt, 2, {goal, {}});
    return {traj, goal, duration, rms, false};
}

/// Sliding-window online estimator; re-fit on demand. Single writer.
class OnlineDesireEstimator {
public:
    OnlineDesireEstimator(std::size_t capacity, double dt, DurationRange range)
        : capacity_(capacity), dt_(dt), range_(range) {
        if (capacity < 6) throw InvalidArgument("online estimator: capacity must be at least 6");
    }

    void push(const Observation& o) {
        if (!window_.empty() && o.time < window_.back().time) {
            throw InvalidArgument("online estimator: observation times must be non-decreasing");
        }
        window_.push_back(o);
        if (window_.size() > capacity_) window_.pop_front();
    }

    [[nodiscard]] bool ready() const noexcept { return window_.size() >= 6; }
    [[nodiscard]] std::size_t size() const noexcept { return window_.size(); }

    [[nodiscard]] EstimatedDesire estimate() const {
        const std::vector<Observation> w(window_.begin(), window_.end());
        return estimate_desire(w, dt_, range_);
    }

private:
    std::size_t capacity_;
    double dt_;
    DurationRange range_;
    std::deque<Observation> window_;
};

/// Displacement trajectory produced by a human force applied at sample
/// `at_index`: force · b(t), where b is a unit-peak bump built from two
/// minimum-jerk ramps meeting at the index. Zero at both ends.
[[nodiscard]] inline Trajectory deformation_desire(const Trajectory& current_ref, Vec2 force, std::size_t at_index) {
    const std::size_t n = current_ref.size();
    if (at_index == 0 || at_index + 1 >= n) throw InvalidArgument("deformation_desire: index must be interior");
    if (!force.finite()) throw InvalidArgument("deformation_desire: non-finite force");
    const double dt = current_ref.dt();
    const double rise = static_cast<double>(at_index);
    const double fall = static_cast<double>(n - 1 - at_index);
    std::vector<State> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double b = 0.0;
        double db = 0.0;
        if (i <= at_index) {
            const double tau = static_cast<double>(i) / rise;
            b = min_jerk_profile(tau);
            db = min_jerk_profile_rate(tau) / (rise * dt);
        } else {
            const double tau = static_cast<double>(n - 1 - i) / fall;
            b = min_jerk_profile(tau);
            db = -min_jerk_profile_rate(tau) / (fall * dt);
        }
        out[i] = {b * force, db * force};
    }
    return Trajectory(dt, std::move(out));
}

}  // namespace cooptraj
