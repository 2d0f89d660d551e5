// Trajectory representation shared by every cooptraj module: a uniformly
// sampled sequence of planar (position, velocity) states.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cooptraj {

// ─── Errors ──────────────────────────────────────────────────────────────────
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised when a pointwise operation receives trajectories with different
/// sample count or sample period.
struct IncompatibleTrajectories : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// ─── Vec2 ────────────────────────────────────────────────────────────────────
struct Vec2 {
    double x{0};
    double y{0};

    constexpr Vec2& operator+=(Vec2 o) noexcept { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) noexcept { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) noexcept { x *= s; y *= s; return *this; }

    [[nodiscard]] double norm() const noexcept { return std::hypot(x, y); }
    [[nodiscard]] constexpr double squaredNorm() const noexcept { return x * x + y * y; }
    [[nodiscard]] bool finite() const noexcept { return std::isfinite(x) && std::isfinite(y); }

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator-(Vec2 a) noexcept { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator/(Vec2 a, double s) noexcept { return {a.x / s, a.y / s}; }
    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;

    // Index access for per-axis algorithms.
    [[nodiscard]] constexpr double operator[](std::size_t axis) const noexcept { return axis == 0 ? x : y; }
    [[nodiscard]] constexpr double& operator[](std::size_t axis) noexcept { return axis == 0 ? x : y; }
};

[[nodiscard]] constexpr double dot(Vec2 a, Vec2 b) noexcept { return a.x * b.x + a.y * b.y; }

// ─── State / BoundaryState ───────────────────────────────────────────────────
struct State {
    Vec2 p;  // position [m]
    Vec2 v;  // velocity [m/s]

    friend constexpr bool operator==(const State&, const State&) = default;
};

/// Full kinematic boundary condition used by the quintic generator.
struct BoundaryState {
    Vec2 p;
    Vec2 v;
    Vec2 a;

    [[nodiscard]] static constexpr BoundaryState at_rest(Vec2 p) noexcept { return {p, {}, {}}; }
    [[nodiscard]] bool finite() const noexcept { return p.finite() && v.finite() && a.finite(); }

    friend constexpr bool operator==(const BoundaryState&, const BoundaryState&) = default;
};

// ─── Trajectory ──────────────────────────────────────────────────────────────
class Trajectory {
public:
    Trajectory(double dt, std::vector<State> samples) : dt_(dt), samples_(std::move(samples)) {
        if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
            throw InvalidArgument("trajectory: dt must be positive and finite");
        }
        if (samples_.size() < 2) {
            throw InvalidArgument("trajectory: at least two samples required");
        }
        for (const auto& s : samples_) {
            if (!s.p.finite() || !s.v.finite()) {
                throw InvalidArgument("trajectory: non-finite sample");
            }
        }
    }

    /// N copies of one state.
    [[nodiscard]] static Trajectory constant(double dt, std::size_t n, State s) {
        return Trajectory(dt, std::vector<State>(n, s));
    }

    [[nodiscard]] double dt() const noexcept { return dt_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] double duration() const noexcept { return static_cast<double>(samples_.size() - 1) * dt_; }
    [[nodiscard]] double time_at(std::size_t i) const noexcept { return static_cast<double>(i) * dt_; }

    [[nodiscard]] const State& operator[](std::size_t i) const noexcept { return samples_[i]; }
    [[nodiscard]] const State& front() const noexcept { return samples_.front(); }
    [[nodiscard]] const State& back() const noexcept { return samples_.back(); }
    [[nodiscard]] std::span<const State> samples() const noexcept { return samples_; }

    /// Central-difference acceleration (one-sided at the ends).
    [[nodiscard]] Vec2 acceleration(std::size_t i) const noexcept {
        const std::size_t n = samples_.size();
        if (i == 0) return (samples_[1].v - samples_[0].v) / dt_;
        if (i + 1 == n) return (samples_[n - 1].v - samples_[n - 2].v) / dt_;
        return (samples_[i + 1].v - samples_[i - 1].v) / (2.0 * dt_);
    }

    /// Linear interpolation of the state at time t; clamps outside [0, duration].
    [[nodiscard]] State at_time(double t) const noexcept {
        if (t <= 0.0) return samples_.front();
        const double u = t / dt_;
        const auto k = static_cast<std::size_t>(std::floor(u));
        if (k + 1 >= samples_.size()) return samples_.back();
        const double frac = u - static_cast<double>(k);
        if (frac == 0.0) return samples_[k];
        const State& a = samples_[k];
        const State& b = samples_[k + 1];
        return {a.p + frac * (b.p - a.p), a.v + frac * (b.v - a.v)};
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;

private:
    double dt_;
    std::vector<State> samples_;
};

[[nodiscard]] inline bool compatible(const Trajectory& a, const Trajectory& b) noexcept {
    return a.size() == b.size() && a.dt() == b.dt();
}

inline void require_compatible(const Trajectory& a, const Trajectory& b, const char* where) {
    if (!compatible(a, b)) {
        throw IncompatibleTrajectories(std::string(where) + ": trajectories differ in sample count or dt (" +
                                       std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
}

// ─── Metrics ─────────────────────────────────────────────────────────────────
enum class MetricKind { MaxPointwiseDistance, MeanSquaredDistance };

struct TrajectoryMetric {
    MetricKind kind;
    double value;  // meters or meters^2
};

/// Position-only distance between compatible trajectories.
[[nodiscard]] inline TrajectoryMetric distance(const Trajectory& a, const Trajectory& b,
                                               MetricKind kind = MetricKind::MaxPointwiseDistance) {
    require_compatible(a, b, "distance");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Vec2 d = a[i].p - b[i].p;
        if (kind == MetricKind::MaxPointwiseDistance) {
            acc = std::max(acc, d.norm());
        } else {
            acc += d.squaredNorm();
        }
    }
    if (kind == MetricKind::MeanSquaredDistance) acc /= static_cast<double>(a.size());
    return {kind, acc};
}

[[nodiscard]] inline double max_distance(const Trajectory& a, const Trajectory& b) {
    return distance(a, b, MetricKind::MaxPointwiseDistance).value;
}

// ─── Pointwise combinators ───────────────────────────────────────────────────

/// wa·a + wb·b applied to positions and velocities.
[[nodiscard]] inline Trajectory combine(const Trajectory& a, double wa, const Trajectory& b, double wb,
                                        const char* where = "combine") {
    require_compatible(a, b, where);
    std::vector<State> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = {wa * a[i].p + wb * b[i].p, wa * a[i].v + wb * b[i].v};
    }
    return Trajectory(a.dt(), std::move(out));
}

/// Recompute velocities from positions by finite differences (central inside,
/// one-sided at the ends).
[[nodiscard]] inline std::vector<State> with_fd_velocities(std::span<const Vec2> positions, double dt) {
    const std::size_t n = positions.size();
    std::vector<State> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 v;
        if (n >= 2) {
            if (i == 0) {
                v = (positions[1] - positions[0]) / dt;
            } else if (i + 1 == n) {
                v = (positions[n - 1] - positions[n - 2]) / dt;
            } else {
                v = (positions[i + 1] - positions[i - 1]) / (2.0 * dt);
            }
        }
        out[i] = {positions[i], v};
    }
    return out;
}

/// Pads with the last sample (or truncates) to exactly n samples.
[[nodiscard]] inline Trajectory conform_to(const Trajectory& t, std::size_t n) {
    if (n < 2) throw InvalidArgument("conform_to: need at least two samples");
    std::vector<State> out(t.samples().begin(), t.samples().begin() + static_cast<std::ptrdiff_t>(std::min(n, t.size())));
    while (out.size() < n) out.push_back(t.back());
    return Trajectory(t.dt(), std::move(out));
}

// ─── Resampling ──────────────────────────────────────────────────────────────

/// Uniform resampling by linear interpolation. Both endpoints are copied
/// exactly; the new duration is round(duration / dt_new) * dt_new.
[[nodiscard]] inline Trajectory resample(const Trajectory& t, double dt_new) {
    if (!(dt_new > 0.0) || !std::isfinite(dt_new)) throw InvalidArgument("resample: dt_new must be positive");
    if (dt_new >= t.duration()) throw InvalidArgument("resample: dt_new must be shorter than the duration");
    if (dt_new == t.dt()) return t;

    const auto steps = static_cast<std::size_t>(std::llround(t.duration() / dt_new));
    std::vector<State> out;
    out.reserve(steps + 1);
    out.push_back(t.front());
    for (std::size_t i = 1; i < steps; ++i) {
        const double u = static_cast<double>(i) * dt_new / t.dt();
        const double nearest = std::round(u);
        // snap to an original sample when the grids coincide
        if (std::abs(u - nearest) < 1e-9) {
            out.push_back(t[std::min(static_cast<std::size_t>(nearest), t.size() - 1)]);
        } else {
            out.push_back(t.at_time(static_cast<double>(i) * dt_new));
        }
    }
    out.push_back(t.back());
    return Trajectory(dt_new, std::move(out));
}

}  // namespace cooptraj
