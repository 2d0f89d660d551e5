// Automation-side trajectory planner. The inner problem is a convex quadratic
// program over sampled positions (jerk, effort and terminal-goal penalties)
// solved exactly by one sparse linear solve per axis; an execution-time
// penalty is handled by a golden-section search over the motion length.

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "cooptraj/quintic.hpp"
#include "cooptraj/safety.hpp"
#include "cooptraj/trajectory.hpp"

namespace cooptraj {

struct CostSpec {
    double w_jerk{1.0};
    double w_goal{1e6};
    double w_time{0.0};
    double w_effort{0.0};
    Vec2 goal;
    double horizon{1.0};  // seconds
    std::optional<SafetyEnvelope> corridor;

    void validate() const {
        for (double w : {w_jerk, w_goal, w_time, w_effort}) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("cost: weights must be finite and >= 0");
        }
        if (w_jerk == 0.0 && w_goal == 0.0 && w_time == 0.0 && w_effort == 0.0) {
            throw InvalidArgument("cost: at least one weight must be positive");
        }
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidArgument("cost: horizon must be positive");
        if (!goal.finite()) throw InvalidArgument("cost: goal must be finite");
        if (corridor) corridor->validate();
    }

    friend bool operator==(const CostSpec&, const CostSpec&) = default;
};

struct PlannerOutput {
    Trajectory trajectory;
    double cost;
    double execution_time;  // time after which the trajectory rests at its final position
    double kkt_residual;    // normalized residual of the optimality conditions
};

namespace detail {

inline constexpr double kRestTolerance = 1e-12;

/// Index of the first sample from which all later positions coincide with the
/// final one.
inline std::size_t rest_index(const Trajectory& t) noexcept {
    const Vec2 last = t.back().p;
    const double tol = kRestTolerance * std::max(1.0, last.norm());
    std::size_t k = t.size() - 1;
    while (k > 0 && (t[k - 1].p - last).norm() <= tol) --k;
    return k;
}

}  // namespace detail

/// J = w_jerk·Σ‖Δ³p/dt³‖²·dt + w_effort·Σ‖Δ²p/dt²‖²·dt + w_goal·‖p_N − goal‖² + w_time·T_exec.
[[nodiscard]] inline double evaluate_cost(const Trajectory& t, const CostSpec& cost) {
    const double dt = t.dt();
    const std::size_t n = t.size();
    double jerk = 0.0;
    double effort = 0.0;
    if (cost.w_jerk != 0.0) {
        for (std::size_t i = 0; i + 3 < n; ++i) {
            const Vec2 j = (t[i + 3].p - 3.0 * t[i + 2].p + 3.0 * t[i + 1].p - t[i].p) / (dt * dt * dt);
            jerk += j.squaredNorm() * dt;
        }
    }
    if (cost.w_effort != 0.0) {
        for (std::size_t i = 0; i + 2 < n; ++i) {
            const Vec2 a = (t[i + 2].p - 2.0 * t[i + 1].p + t[i].p) / (dt * dt);
            effort += a.squaredNorm() * dt;
        }
    }
    const double goal = (t.back().p - cost.goal).squaredNorm();
    const double exec = cost.w_time != 0.0 ? static_cast<double>(detail::rest_index(t)) * dt : 0.0;
    return cost.w_jerk * jerk + cost.w_effort * effort + cost.w_goal * goal + cost.w_time * exec;
}

namespace detail {

struct InnerSolution {
    Trajectory trajectory;
    double residual;
};

/// Solves the QP for a motion lasting `steps` intervals, holding the final
/// position for the remaining `total - steps` intervals.
///
/// Decision variables per axis: q_3 … q_{steps-3} and the rest position z.
/// q_0..q_2 are pinned by the start state; q_{steps-2}..q_{total} = z.
inline InnerSolution solve_fixed_length(const BoundaryState& start, const CostSpec& cost, double dt,
                                        std::size_t steps, std::size_t total) {
    using SpMat = Eigen::SparseMatrix<double>;
    using Triplet = Eigen::Triplet<double>;

    const std::size_t n = total + 1;
    const std::size_t free_interior = steps >= 5 ? steps - 5 : 0;
    const std::size_t nv = free_interior + 1;
    const std::size_t z_col = free_interior;

    // p = M x + c (c filled per axis from the pinned start samples).
    std::vector<Triplet> m_trip;
    for (std::size_t i = 3; i + 3 <= steps; ++i) m_trip.emplace_back(i, i - 3, 1.0);
    for (std::size_t i = steps - 2; i < n; ++i) m_trip.emplace_back(i, z_col, 1.0);
    SpMat M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nv));
    M.setFromTriplets(m_trip.begin(), m_trip.end());

    const double sqrt_dt = std::sqrt(dt);
    std::vector<Triplet> d3_trip, d2_trip;
    const double s3 = sqrt_dt / (dt * dt * dt);
    const double s2 = sqrt_dt / (dt * dt);
    for (std::size_t i = 0; i + 3 < n; ++i) {
        d3_trip.emplace_back(i, i, -s3);
        d3_trip.emplace_back(i, i + 1, 3.0 * s3);
        d3_trip.emplace_back(i, i + 2, -3.0 * s3);
        d3_trip.emplace_back(i, i + 3, s3);
    }
    for (std::size_t i = 0; i + 2 < n; ++i) {
        d2_trip.emplace_back(i, i, s2);
        d2_trip.emplace_back(i, i + 1, -2.0 * s2);
        d2_trip.emplace_back(i, i + 2, s2);
    }
    SpMat D3(static_cast<Eigen::Index>(n - 3), static_cast<Eigen::Index>(n));
    SpMat D2(static_cast<Eigen::Index>(n - 2), static_cast<Eigen::Index>(n));
    D3.setFromTriplets(d3_trip.begin(), d3_trip.end());
    D2.setFromTriplets(d2_trip.begin(), d2_trip.end());

    const SpMat A3 = D3 * M;
    const SpMat A2 = D2 * M;
    SpMat H = cost.w_jerk * SpMat(A3.transpose() * A3) + cost.w_effort * SpMat(A2.transpose() * A2);
    H.coeffRef(static_cast<Eigen::Index>(z_col), static_cast<Eigen::Index>(z_col)) += cost.w_goal;
    H.makeCompressed();

    Eigen::SimplicialLDLT<SpMat> solver;
    solver.compute(H);
    if (solver.info() != Eigen::Success) throw InvalidArgument("plan: singular optimality system");

    // solved relative to the start position
    const BoundaryState& s = start;
    const Vec2 pinned[3] = {{}, dt * s.v + 0.5 * dt * dt * s.a, 2.0 * dt * s.v + 2.0 * dt * dt * s.a};
    const Vec2 goal = cost.goal - s.p;

    std::vector<Vec2> positions(n);
    double residual = 0.0;
    for (std::size_t axis = 0; axis < 2; ++axis) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < 3; ++i) c(static_cast<Eigen::Index>(i)) = pinned[i][axis];
        const Eigen::VectorXd b3 = D3 * c;
        const Eigen::VectorXd b2 = D2 * c;
        Eigen::VectorXd rhs = -(cost.w_jerk * (A3.transpose() * b3) + cost.w_effort * (A2.transpose() * b2));
        rhs(static_cast<Eigen::Index>(z_col)) += cost.w_goal * goal[axis];

        const Eigen::VectorXd x = solver.solve(rhs);
        if (solver.info() != Eigen::Success || !x.allFinite()) throw InvalidArgument("plan: singular optimality system");

        const double scale = H.norm() * x.norm() + rhs.norm();
        const double r = scale > 0.0 ? (H * x - rhs).norm() / scale : 0.0;
        residual = std::max(residual, r);

        const Eigen::VectorXd p = M * x + c;
        for (std::size_t i = 0; i < n; ++i) positions[i][axis] = s.p[axis] + p(static_cast<Eigen::Index>(i));
    }

    auto samples = with_fd_velocities(positions, dt);
    samples.front().v = start.v;
    return {Trajectory(dt, std::move(samples)), residual};
}

}  // namespace detail

/// Plans the automation's desired trajectory from `start` under `cost`.
/// Sampled every dt over cost.horizon; the motion ends at rest.
[[nodiscard]] inline PlannerOutput plan(const BoundaryState& start, const CostSpec& cost, double dt) {
    cost.validate();
    if (!start.finite()) throw InvalidArgument("plan: non-finite start state");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("plan: dt must be positive");
    if (cost.w_jerk == 0.0 && cost.w_effort == 0.0) {
        throw InvalidArgument("plan: singular optimality system (w_jerk and w_effort both zero)");
    }
    const double ratio = cost.horizon / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-6) throw InvalidArgument("plan: dt must divide the horizon");
    const auto total = static_cast<std::size_t>(std::llround(ratio));
    constexpr std::size_t kMinSteps = 5;
    if (total < kMinSteps) throw InvalidArgument("plan: horizon too short (need at least 5 steps)");

    auto finish = [&](detail::InnerSolution sol) {
        const double c = evaluate_cost(sol.trajectory, cost);
        const double exec = static_cast<double>(detail::rest_index(sol.trajectory)) * dt;
        return PlannerOutput{std::move(sol.trajectory), c, exec, sol.residual};
    };

    if (cost.w_time == 0.0) return finish(detail::solve_fixed_length(start, cost, dt, total, total));

    // Golden-section over the integer motion length.
    std::map<std::size_t, PlannerOutput> cache;
    auto eval = [&](std::size_t steps) -> const PlannerOutput& {
        auto it = cache.find(steps);
        if (it == cache.end()) {
            it = cache.emplace(steps, finish(detail::solve_fixed_length(start, cost, dt, steps, total))).first;
        }
        return it->second;
    };

    constexpr double kInvPhi = 0.6180339887498949;
    std::size_t lo = kMinSteps;
    std::size_t hi = total;
    while (hi - lo > 3) {
        const double span = static_cast<double>(hi - lo);
        auto a = lo + static_cast<std::size_t>(std::llround(span * (1.0 - kInvPhi)));
        auto b = lo + static_cast<std::size_t>(std::llround(span * kInvPhi));
        if (a == b) ++b;
        if (eval(a).cost <= eval(b).cost) {
            hi = b;
        } else {
            lo = a;
        }
    }
    std::size_t best = lo;
    for (std::size_t k = lo + 1; k <= hi; ++k) {
        if (eval(k).cost < eval(best).cost) best = k;
    }
    return eval(best);
}

}  // namespace cooptraj
