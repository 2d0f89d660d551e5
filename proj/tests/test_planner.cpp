#include <gtest/gtest.h>

#include "cooptraj/planner.hpp"
#include "support.hpp"

using namespace cooptraj;
using cooptraj::testing::Rng;

namespace {

CostSpec unit_cost() {
    CostSpec c;
    c.goal = {1, 0};
    c.horizon = 1.0;
    return c;
}

}  // namespace

TEST(Planner, StartAtGoalGivesConstantZeroCost) {
    const auto out = plan(BoundaryState::at_rest({1, 0}), unit_cost(), 0.01);
    for (const auto& s : out.trajectory.samples()) {
        EXPECT_NEAR((s.p - Vec2{1, 0}).norm(), 0.0, 1e-12);
        EXPECT_NEAR(s.v.norm(), 0.0, 1e-9);
    }
    EXPECT_NEAR(out.cost, 0.0, 1e-12);
}

TEST(Planner, CloseToAnalyticQuintic) {
    const auto out = plan(BoundaryState::at_rest({0, 0}), unit_cost(), 0.01);
    ASSERT_EQ(out.trajectory.size(), 101u);
    const QuinticSegment oracle(BoundaryState::at_rest({0, 0}), BoundaryState::at_rest({1, 0}), 1.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < out.trajectory.size(); ++i) {
        worst = std::max(worst, (out.trajectory[i].p - oracle.evaluate(out.trajectory.time_at(i)).p).norm());
    }
    EXPECT_LT(worst, 0.02);
}

TEST(Planner, DoublingWeightsKeepsArgmin) {
    CostSpec c = unit_cost();
    c.goal = {0.7, -1.3};
    c.w_effort = 0.3;
    const BoundaryState start{{0.1, 0.2}, {0.5, 0}, {0, 0}};
    const auto a = plan(start, c, 0.02);
    CostSpec d = c;
    d.w_jerk *= 2;
    d.w_goal *= 2;
    d.w_effort *= 2;
    const auto b = plan(start, d, 0.02);
    EXPECT_LT(max_distance(a.trajectory, b.trajectory), 1e-9);
    EXPECT_NEAR(b.cost, 2.0 * a.cost, 1e-9 * std::max(1.0, a.cost));
}

TEST(Planner, CostSelfConsistent) {
    CostSpec c = unit_cost();
    c.w_effort = 0.1;
    const auto out = plan(BoundaryState::at_rest({0, 0}), c, 0.01);
    EXPECT_EQ(evaluate_cost(out.trajectory, c), out.cost);
}

TEST(Planner, KktResidualSmall) {
    Rng rng(21);
    for (int i = 0; i < 20; ++i) {
        CostSpec c;
        c.goal = rng.vec(-3, 3);
        c.horizon = 2.0;
        c.w_effort = rng.uniform(0, 1);
        const BoundaryState start{rng.vec(-1, 1), rng.vec(-1, 1), rng.vec(-1, 1)};
        EXPECT_LT(plan(start, c, 0.02).kkt_residual, 1e-8);
    }
}

TEST(Planner, BeatsRandomPerturbationsWithSameEndpoints) {
    CostSpec c = unit_cost();
    c.goal = {2, 1};
    c.horizon = 2.0;
    c.w_effort = 0.05;
    const auto out = plan(BoundaryState::at_rest({0, 0}), c, 0.02);
    const auto& t = out.trajectory;
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<State> s(t.samples().begin(), t.samples().end());
        const double amp = rng.uniform(1e-4, 0.1);
        for (std::size_t i = 3; i + 3 < s.size(); ++i) s[i].p += amp * Vec2{rng.normal(), rng.normal()};
        EXPECT_GE(evaluate_cost(Trajectory(t.dt(), s), c), out.cost);
    }
}

TEST(Planner, TimePenaltyMatchesExhaustiveSearch) {
    for (double w_time : {0.5, 5.0, 50.0}) {
        CostSpec c;
        c.goal = {1, 0};
        c.horizon = 2.0;
        c.w_goal = 1e3;
        c.w_time = w_time;
        const auto start = BoundaryState::at_rest({0, 0});
        const auto out = plan(start, c, 0.05);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t steps = 5; steps <= 40; ++steps) {
            const auto sol = detail::solve_fixed_length(start, c, 0.05, steps, 40);
            best = std::min(best, evaluate_cost(sol.trajectory, c));
        }
        EXPECT_NEAR(out.cost, best, 1e-9 * best) << "w_time=" << w_time;
        EXPECT_LE(out.execution_time, c.horizon);
    }
}

TEST(Planner, LargerTimePenaltyNeverSlower) {
    CostSpec c;
    c.goal = {1, 1};
    c.horizon = 3.0;
    c.w_goal = 1e3;
    double prev = std::numeric_limits<double>::infinity();
    for (double w_time : {0.1, 1.0, 10.0, 100.0}) {
        c.w_time = w_time;
        const double exec = plan(BoundaryState::at_rest({0, 0}), c, 0.05).execution_time;
        EXPECT_LE(exec, prev);
        prev = exec;
    }
}

TEST(EvaluateCost, Examples) {
    CostSpec c;
    c.goal = {1, 2};
    c.w_jerk = 3;
    c.w_effort = 2;
    const auto at_goal = Trajectory::constant(0.1, 11, {{1, 2}, {}});
    EXPECT_EQ(evaluate_cost(at_goal, c), 0.0);

    CostSpec g;
    g.w_jerk = 0;
    g.w_goal = 1;
    g.goal = {3, 0};
    EXPECT_EQ(evaluate_cost(Trajectory::constant(0.1, 11, {}), g), 9.0);
}

TEST(Planner, RejectsInvalidInput) {
    CostSpec c = unit_cost();
    EXPECT_THROW((void)plan(BoundaryState::at_rest({0, 0}), c, 0.03), InvalidArgument);
    EXPECT_THROW((void)plan(BoundaryState::at_rest({0, 0}), c, 0.25), InvalidArgument);
    c.w_jerk = 0;
    EXPECT_THROW((void)plan(BoundaryState::at_rest({0, 0}), c, 0.01), InvalidArgument);
    CostSpec neg = unit_cost();
    neg.w_goal = -1;
    EXPECT_THROW((void)plan(BoundaryState::at_rest({0, 0}), neg, 0.01), InvalidArgument);
}
