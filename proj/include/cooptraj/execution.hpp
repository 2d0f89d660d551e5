// Coupled-plant execution: two PD tracking controllers (human, automation)
// act on one double integrator. Quantifies action-level control conflict.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cooptraj/json_io.hpp"
#include "cooptraj/trajectory.hpp"

namespace cooptraj {

/// Thrown when the simulated state stops being finite.
struct SimulationError : std::runtime_error {
    SimulationError(const std::string& what, std::size_t tick) : std::runtime_error(what), tick(tick) {}
    std::size_t tick;
};

/// Double integrator ẍ = u_H + u_A, semi-implicit Euler (velocity first).
struct Plant {
    State x;
    double dt_sim{0.01};

    void step(Vec2 u_total) noexcept {
        x.v += dt_sim * u_total;
        x.p += dt_sim * x.v;
    }
};

struct Gains {
    double kp{4.0};
    double kd{4.0};

    friend bool operator==(const Gains&, const Gains&) = default;
};

class Controller {
public:
    Controller(Gains gains, std::shared_ptr<const Trajectory> reference, std::optional<double> u_max = std::nullopt)
        : gains_(gains), reference_(std::move(reference)), u_max_(u_max) {
        if (!(gains_.kp > 0.0) || !(gains_.kd > 0.0)) throw InvalidArgument("controller: gains must be positive");
        if (!reference_) throw InvalidArgument("controller: reference required");
        if (u_max_ && !(*u_max_ > 0.0)) throw InvalidArgument("controller: u_max must be positive");
    }

    Controller(Gains gains, const Trajectory& reference, std::optional<double> u_max = std::nullopt)
        : Controller(gains, std::make_shared<const Trajectory>(reference), u_max) {}

    /// u = −kp (p − p_ref(t)) − kd (v − v_ref(t)); the final reference sample
    /// is held after the reference ends.
    [[nodiscard]] Vec2 command(const State& x, double t) const noexcept {
        const State ref = reference_->at_time(t);
        Vec2 u = -gains_.kp * (x.p - ref.p) - gains_.kd * (x.v - ref.v);
        if (u_max_) {
            const double n = u.norm();
            if (n > *u_max_) u *= *u_max_ / n;
        }
        return u;
    }

    [[nodiscard]] const Gains& gains() const noexcept { return gains_; }
    [[nodiscard]] const std::shared_ptr<const Trajectory>& reference() const noexcept { return reference_; }

private:
    Gains gains_;
    std::shared_ptr<const Trajectory> reference_;
    std::optional<double> u_max_;
};

/// max(0, −u_H·u_A): the opposing component of the two inputs.
[[nodiscard]] constexpr double conflict(Vec2 u_H, Vec2 u_A) noexcept { return std::max(0.0, -dot(u_H, u_A)); }

struct Tick {
    double t;
    State x;
    Vec2 u_H;
    Vec2 u_A;
    double conflict;

    friend bool operator==(const Tick&, const Tick&) = default;
};

struct ExecutionTrace {
    double dt_sim;
    std::vector<Tick> ticks;

    friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

/// Runs round(duration / dt_sim) steps; ticks are recorded before each step
/// and once more at the end.
[[nodiscard]] inline ExecutionTrace simulate(Plant plant, const Controller& human, const Controller& automation,
                                            double duration) {
    if (!(plant.dt_sim > 0.0)) throw InvalidArgument("simulate: dt_sim must be positive");
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw InvalidArgument("simulate: duration must be >= 0");
    const auto steps = static_cast<std::size_t>(std::llround(duration / plant.dt_sim));
    ExecutionTrace trace{plant.dt_sim, {}};
    trace.ticks.reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * plant.dt_sim;
        const Vec2 u_H = human.command(plant.x, t);
        const Vec2 u_A = automation.command(plant.x, t);
        if (!plant.x.p.finite() || !plant.x.v.finite() || !u_H.finite() || !u_A.finite()) {
            throw SimulationError("simulate: non-finite state at tick " + std::to_string(k), k);
        }
        trace.ticks.push_back({t, plant.x, u_H, u_A, conflict(u_H, u_A)});
        if (k < steps) plant.step(u_H + u_A);
    }
    return trace;
}

struct ConflictSummary {
    double mean_conflict;
    double max_conflict;
    double steady_state_conflict;  // mean over the final steady window
    double energy_H;               // ∫‖u_H‖² dt
    double energy_A;
    std::optional<double> tracking_rms_H;  // vs. the human's own desire
    std::optional<double> tracking_rms_A;
    Vec2 final_position;
    Vec2 final_u_H;
    Vec2 final_u_A;
};

/// Length of the trailing window used for steady-state figures.
[[nodiscard]] inline double steady_window(double duration) noexcept { return std::min(1.0, 0.1 * duration); }

[[nodiscard]] inline ConflictSummary conflict_report(const ExecutionTrace& trace, const Trajectory* desire_H = nullptr,
                                                     const Trajectory* desire_A = nullptr) {
    ConflictSummary s{};
    if (trace.ticks.empty()) return s;
    const double dt = trace.dt_sim;
    const double t_end = trace.ticks.back().t;
    const double window_start = t_end - steady_window(t_end);
    double steady_sum = 0.0;
    std::size_t steady_n = 0;
    double sum = 0.0;
    double track_H = 0.0, track_A = 0.0;
    for (const auto& k : trace.ticks) {
        sum += k.conflict;
        s.max_conflict = std::max(s.max_conflict, k.conflict);
        s.energy_H += k.u_H.squaredNorm() * dt;
        s.energy_A += k.u_A.squaredNorm() * dt;
        if (k.t >= window_start - 1e-12) {
            steady_sum += k.conflict;
            ++steady_n;
        }
        if (desire_H) track_H += (k.x.p - desire_H->at_time(k.t).p).squaredNorm();
        if (desire_A) track_A += (k.x.p - desire_A->at_time(k.t).p).squaredNorm();
    }
    const auto n = static_cast<double>(trace.ticks.size());
    s.mean_conflict = sum / n;
    s.steady_state_conflict = steady_n ? steady_sum / static_cast<double>(steady_n) : trace.ticks.back().conflict;
    if (desire_H) s.tracking_rms_H = std::sqrt(track_H / n);
    if (desire_A) s.tracking_rms_A = std::sqrt(track_A / n);
    s.final_position = trace.ticks.back().x.p;
    s.final_u_H = trace.ticks.back().u_H;
    s.final_u_A = trace.ticks.back().u_A;
    return s;
}

inline Json to_json(const ConflictSummary& s) {
    Json j;
    j["mean_conflict"] = s.mean_conflict;
    j["max_conflict"] = s.max_conflict;
    j["steady_state_conflict"] = s.steady_state_conflict;
    j["energy_H"] = s.energy_H;
    j["energy_A"] = s.energy_A;
    j["tracking_rms_H"] = s.tracking_rms_H ? Json(*s.tracking_rms_H) : Json(nullptr);
    j["tracking_rms_A"] = s.tracking_rms_A ? Json(*s.tracking_rms_A) : Json(nullptr);
    j["final_position"] = to_json(s.final_position);
    j["final_u_H"] = to_json(s.final_u_H);
    j["final_u_A"] = to_json(s.final_u_A);
    return j;
}

inline Json to_json(const Tick& k) {
    Json j;
    j["t"] = k.t;
    j["x"] = Json{{"p", to_json(k.x.p)}, {"v", to_json(k.x.v)}};
    j["u_H"] = to_json(k.u_H);
    j["u_A"] = to_json(k.u_A);
    j["conflict"] = k.conflict;
    return j;
}

/// Shortest round-trip decimal representation of a double.
[[nodiscard]] inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // prefer the shorter form when it round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[32];
        std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
        if (std::strtod(shorter, nullptr) == v) return shorter;
    }
    return buf;
}

inline constexpr const char* kTraceCsvHeader = "t,px,py,vx,vy,uHx,uHy,uAx,uAy,conflict";

[[nodiscard]] inline std::string trace_csv(const ExecutionTrace& trace) {
    std::string out = kTraceCsvHeader;
    out += '\n';
    for (const auto& k : trace.ticks) {
        const double cols[] = {k.t, k.x.p.x, k.x.p.y, k.x.v.x, k.x.v.y, k.u_H.x, k.u_H.y, k.u_A.x, k.u_A.y, k.conflict};
        for (std::size_t i = 0; i < std::size(cols); ++i) {
            if (i) out += ',';
            out += format_double(cols[i]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace cooptraj
