// Shared test helpers and independent oracles.

#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "cooptraj/trajectory.hpp"

namespace cooptraj::testing {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    Vec2 vec(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi)}; }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// Dense finite-difference minimum-jerk solve on [0, 1] from 0 to 1 at rest:
/// minimizes the sum of squared third differences with the first three and
/// last three grid values pinned. Returns x_0..x_n.
inline std::vector<double> fd_min_jerk_unit(int n) {
    const int m = n + 1;
    const int free_lo = 3;
    const int free_hi = n - 3;  // inclusive
    const int k = free_hi - free_lo + 1;
    std::vector<double> x(m, 0.0);
    for (int i = n - 2; i <= n; ++i) x[i] = 1.0;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n - 2, k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n - 2);
    const double stencil[4] = {-1.0, 3.0, -3.0, 1.0};
    for (int r = 0; r + 3 <= n; ++r) {
        for (int j = 0; j < 4; ++j) {
            const int idx = r + j;
            if (idx >= free_lo && idx <= free_hi) {
                A(r, idx - free_lo) += stencil[j];
            } else {
                b(r) -= stencil[j] * x[idx];
            }
        }
    }
    const Eigen::VectorXd sol = (A.transpose() * A).ldlt().solve(A.transpose() * b);
    for (int i = 0; i < k; ++i) x[free_lo + i] = sol(i);
    return x;
}

inline Trajectory line(double dt, std::size_t n, Vec2 from, Vec2 to) {
    std::vector<State> s(n);
    const Vec2 v = (to - from) / (static_cast<double>(n - 1) * dt);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(n - 1);
        s[i] = {from + u * (to - from), v};
    }
    return Trajectory(dt, std::move(s));
}

}  // namespace cooptraj::testing
