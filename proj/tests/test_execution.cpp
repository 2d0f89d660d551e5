#include <gtest/gtest.h>

#include "cooptraj/execution.hpp"
#include "cooptraj/quintic.hpp"
#include "support.hpp"

using namespace cooptraj;
using cooptraj::testing::Rng;

namespace {

Trajectory hold(Vec2 p) { return Trajectory::constant(0.05, 2, {p, {}}); }

ExecutionTrace tug(Gains g, double duration = 20.0) {
    const Controller human(g, hold({1, 0}));
    const Controller automation(g, hold({-1, 0}));
    return simulate(Plant{{}, 0.01}, human, automation, duration);
}

}  // namespace

TEST(Simulate, IdenticalRestReferencesNoInput) {
    const auto ref = std::make_shared<const Trajectory>(hold({0, 0}));
    const auto trace = simulate(Plant{{}, 0.01}, Controller({4, 4}, ref), Controller({4, 4}, ref), 5.0);
    for (const auto& k : trace.ticks) {
        EXPECT_EQ(k.u_H, Vec2{});
        EXPECT_EQ(k.u_A, Vec2{});
        EXPECT_EQ(k.conflict, 0.0);
    }
    const auto s = conflict_report(trace);
    EXPECT_EQ(s.mean_conflict, 0.0);
    EXPECT_EQ(s.max_conflict, 0.0);
    EXPECT_EQ(s.steady_state_conflict, 0.0);
}

TEST(Simulate, TugOfWarEquilibrium) {
    const auto trace = tug({4, 4});
    const auto& last = trace.ticks.back();
    // oracle: 0 = -2 kp x + kp (r_H + r_A)  =>  x = 0,  u_H = kp (r_H - r_A) / 2
    EXPECT_NEAR(last.x.p.norm(), 0.0, 1e-3);
    EXPECT_NEAR((last.u_H - Vec2{4, 0}).norm(), 0.0, 1e-3);
    EXPECT_NEAR((last.u_A - Vec2{-4, 0}).norm(), 0.0, 1e-3);
    EXPECT_NEAR((last.u_H + last.u_A).norm(), 0.0, 1e-3);
    EXPECT_NEAR(conflict_report(trace).steady_state_conflict, 16.0, 0.05);
}

TEST(Simulate, GainScalingScalesInputs) {
    for (double alpha : {0.5, 2.0, 3.0}) {
        const auto trace = tug({4 * alpha, 4 * alpha}, 30.0);
        const auto& last = trace.ticks.back();
        EXPECT_NEAR(last.x.p.norm(), 0.0, 1e-3);
        EXPECT_NEAR(last.u_H.norm(), 4.0 * alpha, 1e-3 * alpha);
        EXPECT_NEAR(last.u_A.norm(), 4.0 * alpha, 1e-3 * alpha);
    }
}

TEST(Simulate, SharedReferenceNoConflict) {
    const auto joint = std::make_shared<const Trajectory>(
        quintic_point_to_point(BoundaryState::at_rest({0, 0}), BoundaryState::at_rest({3, 1}), 2.0, 0.05));
    const auto trace = simulate(Plant{{}, 0.01}, Controller({4, 4}, joint), Controller({4, 4}, joint), 10.0);
    for (const auto& k : trace.ticks) EXPECT_LT(k.conflict, 1e-9);
    EXPECT_LT(conflict_report(trace).steady_state_conflict, 1e-6);
}

TEST(Simulate, ConflictNonNegative) {
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const Controller h({rng.uniform(1, 6), rng.uniform(1, 6)}, hold(rng.vec(-2, 2)));
        const Controller a({rng.uniform(1, 6), rng.uniform(1, 6)}, hold(rng.vec(-2, 2)));
        for (const auto& k : simulate(Plant{{rng.vec(-1, 1), rng.vec(-1, 1)}, 0.01}, h, a, 3.0).ticks) {
            EXPECT_GE(k.conflict, 0.0);
        }
    }
}

TEST(Simulate, Deterministic) {
    const auto a = tug({4, 4}, 5.0);
    const auto b = tug({4, 4}, 5.0);
    EXPECT_EQ(a, b);
    EXPECT_EQ(trace_csv(a), trace_csv(b));
}

TEST(Simulate, TickCountAndTimes) {
    const auto trace = tug({4, 4}, 1.0);
    ASSERT_EQ(trace.ticks.size(), 101u);
    EXPECT_EQ(trace.ticks.front().t, 0.0);
    EXPECT_EQ(trace.ticks.front().x.p, Vec2{});
    EXPECT_DOUBLE_EQ(trace.ticks.back().t, 1.0);
}

TEST(Simulate, DivergenceRaisesWithTick) {
    const Controller h({1e300, 1e300}, hold({1, 0}));
    const Controller a({1e300, 1e300}, hold({-1, 1}));
    try {
        (void)simulate(Plant{{}, 0.5}, h, a, 100.0);
        FAIL() << "expected SimulationError";
    } catch (const SimulationError& e) {
        EXPECT_GT(e.tick, 0u);
    }
}

TEST(Controller, SaturatesAtUMax) {
    const Controller c({4, 4}, hold({10, 0}), 2.0);
    EXPECT_NEAR(c.command({}, 0.0).norm(), 2.0, 1e-15);
    EXPECT_THROW(Controller({0, 4}, hold({})), InvalidArgument);
    EXPECT_THROW(Controller({4, 4}, hold({}), 0.0), InvalidArgument);
}

TEST(ConflictMetric, Definition) {
    EXPECT_EQ(conflict({1, 0}, {1, 0}), 0.0);
    EXPECT_EQ(conflict({4, 0}, {-4, 0}), 16.0);
    EXPECT_EQ(conflict({1, 0}, {0, 1}), 0.0);
    EXPECT_EQ(conflict({2, 1}, {-1, -3}), 5.0);
}

TEST(TraceCsv, HeaderAndRoundTripNumbers) {
    const auto trace = tug({4, 4}, 0.5);
    const auto csv = trace_csv(trace);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,px,py,vx,vy,uHx,uHy,uAx,uAy,conflict");
    EXPECT_EQ(csv.find('\r'), std::string::npos);
    EXPECT_EQ(csv.back(), '\n');
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.integer(-20, 20));
        EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(16), "16");
}
