// Quintic (minimum-jerk family) point-to-point generator.

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "cooptraj/trajectory.hpp"

namespace cooptraj {

/// Normalized rest-to-rest minimum-jerk profile s(τ) = 10τ³ − 15τ⁴ + 6τ⁵.
[[nodiscard]] constexpr double min_jerk_profile(double tau) noexcept {
    const double t3 = tau * tau * tau;
    return t3 * (10.0 + tau * (-15.0 + 6.0 * tau));
}

/// ds/dτ of the minimum-jerk profile.
[[nodiscard]] constexpr double min_jerk_profile_rate(double tau) noexcept {
    const double t2 = tau * tau;
    return t2 * (30.0 + tau * (-60.0 + 30.0 * tau));
}

struct KinematicSample {
    Vec2 p;
    Vec2 v;
    Vec2 a;
    Vec2 jerk;
};

/// One quintic polynomial per axis joining two full boundary states over T.
class QuinticSegment {
public:
    QuinticSegment(const BoundaryState& start, const BoundaryState& goal, double duration)
        : start_(start), goal_(goal), duration_(duration) {
        if (!(duration > 0.0) || !std::isfinite(duration)) throw InvalidArgument("quintic: duration must be positive");
        if (!start.finite() || !goal.finite()) throw InvalidArgument("quintic: non-finite boundary state");
        for (std::size_t axis = 0; axis < 2; ++axis) {
            coeffs_[axis] = solve_axis(start.p[axis], start.v[axis], start.a[axis], goal.p[axis], goal.v[axis],
                                       goal.a[axis], duration);
        }
    }

    [[nodiscard]] double duration() const noexcept { return duration_; }
    [[nodiscard]] const BoundaryState& start() const noexcept { return start_; }
    [[nodiscard]] const BoundaryState& goal() const noexcept { return goal_; }

    /// Evaluates at time t ∈ [0, T] (not clamped).
    [[nodiscard]] KinematicSample evaluate(double t) const noexcept {
        KinematicSample s;
        for (std::size_t axis = 0; axis < 2; ++axis) {
            const auto& c = coeffs_[axis];
            s.p[axis] = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
            s.v[axis] = c[1] + t * (2 * c[2] + t * (3 * c[3] + t * (4 * c[4] + t * 5 * c[5])));
            s.a[axis] = 2 * c[2] + t * (6 * c[3] + t * (12 * c[4] + t * 20 * c[5]));
            s.jerk[axis] = 6 * c[3] + t * (24 * c[4] + t * 60 * c[5]);
        }
        return s;
    }

    /// Samples at i·dt for i = 0..ceil(T/dt); the final sample is evaluated at
    /// exactly T so the goal boundary condition holds on the last sample.
    [[nodiscard]] Trajectory sample(double dt) const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("quintic: dt must be positive");
        const auto steps = sample_steps(duration_, dt);
        std::vector<State> out(steps + 1);
        for (std::size_t i = 0; i <= steps; ++i) {
            const double t = i == steps ? duration_ : std::min(static_cast<double>(i) * dt, duration_);
            const auto k = evaluate(t);
            out[i] = {k.p, k.v};
        }
        return Trajectory(dt, std::move(out));
    }

    /// Number of dt steps needed to cover T (T/dt rounded up, tolerant to
    /// representation error when T is a multiple of dt).
    [[nodiscard]] static std::size_t sample_steps(double duration, double dt) noexcept {
        const double ratio = duration / dt;
        const double nearest = std::round(ratio);
        if (std::abs(ratio - nearest) < 1e-9 * std::max(1.0, nearest)) return static_cast<std::size_t>(nearest);
        return static_cast<std::size_t>(std::ceil(ratio));
    }

private:
    // Closed-form coefficients for x(t) = Σ c_k t^k meeting position, velocity
    // and acceleration at t = 0 and t = T.
    static std::array<double, 6> solve_axis(double p0, double v0, double a0, double p1, double v1, double a1,
                                            double T) noexcept {
        const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
        const double dp = p1 - p0 - v0 * T - 0.5 * a0 * T2;
        const double dv = v1 - v0 - a0 * T;
        const double da = a1 - a0;
        std::array<double, 6> c{};
        c[0] = p0;
        c[1] = v0;
        c[2] = 0.5 * a0;
        c[3] = (10.0 * dp - 4.0 * dv * T + 0.5 * da * T2) / T3;
        c[4] = (-15.0 * dp + 7.0 * dv * T - da * T2) / T4;
        c[5] = (6.0 * dp - 3.0 * dv * T + 0.5 * da * T2) / T5;
        return c;
    }

    BoundaryState start_;
    BoundaryState goal_;
    double duration_;
    std::array<std::array<double, 6>, 2> coeffs_{};
};

/// Quintic trajectory between two boundary states, sampled every dt.
[[nodiscard]] inline Trajectory quintic_point_to_point(const BoundaryState& start, const BoundaryState& goal,
                                                       double duration, double dt) {
    if (!(duration > 0.0) || !(dt > 0.0)) throw InvalidArgument("quintic_point_to_point: T and dt must be positive");
    if (duration < 2.0 * dt) throw InvalidArgument("quintic_point_to_point: T must span at least two steps");
    return QuinticSegment(start, goal, duration).sample(dt);
}

}  // namespace cooptraj
