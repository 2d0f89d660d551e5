#include <gtest/gtest.h>

#include <cmath>

#include "cooptraj/json_io.hpp"
#include "cooptraj/quintic.hpp"
#include "cooptraj/safety.hpp"
#include "support.hpp"

using namespace cooptraj;
using cooptraj::testing::Rng;

// ─── Quintic ─────────────────────────────────────────────────────────────────

TEST(Quintic, RestToRestMidpointIsHalfway) {
    const QuinticSegment seg(BoundaryState::at_rest({0, 0}), BoundaryState::at_rest({1, 0}), 1.0);
    const auto k = seg.evaluate(0.5);
    EXPECT_NEAR(k.p.x, 0.5, 1e-15);
    EXPECT_EQ(k.p.y, 0.0);
}

TEST(Quintic, StartEqualsGoalIsConstant) {
    const Vec2 p{0.3, -2.0};
    const Trajectory t = quintic_point_to_point(BoundaryState::at_rest(p), BoundaryState::at_rest(p), 1.7, 0.1);
    for (const auto& s : t.samples()) {
        EXPECT_EQ(s.p, p);
        EXPECT_EQ(s.v, Vec2{});
    }
}

TEST(Quintic, QuarterPointMatchesBasis) {
    const double s = 10 * 0.015625 - 15 * 0.00390625 + 6 * 0.0009765625;
    ASSERT_EQ(s, 0.103515625);
    EXPECT_DOUBLE_EQ(min_jerk_profile(0.25), 0.103515625);
    const QuinticSegment seg(BoundaryState::at_rest({0, 0}), BoundaryState::at_rest({2, 1}), 2.0);
    const auto k = seg.evaluate(0.5);
    EXPECT_NEAR(k.p.x, 2.0 * 0.103515625, 1e-15);
    EXPECT_NEAR(k.p.y, 1.0 * 0.103515625, 1e-15);
}

TEST(Quintic, QuarterPointMatchesFiniteDifferenceJerkSolve) {
    // discretization error of the pinned-end stencil is O(h)
    double prev_err = 1.0;
    for (int n : {200, 400, 800}) {
        const auto x = cooptraj::testing::fd_min_jerk_unit(n);
        const double err = std::abs(x[n / 4] - 0.103515625);
        EXPECT_LT(err, prev_err);
        prev_err = err;
    }
    EXPECT_LT(prev_err, 5e-3);
}

TEST(Quintic, PeakVelocityIsFifteenEighths) {
    const QuinticSegment seg(BoundaryState::at_rest({-1, 2}), BoundaryState::at_rest({3, -1}), 2.5);
    const double dp = 5.0;
    EXPECT_NEAR(seg.evaluate(1.25).v.norm(), 15.0 / 8.0 * dp / 2.5, 1e-12);
}

TEST(Quintic, BoundaryResidualsOnRandomCases) {
    Rng rng(11);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const BoundaryState a{rng.vec(-5, 5), rng.vec(-3, 3), rng.vec(-3, 3)};
        const BoundaryState b{rng.vec(-5, 5), rng.vec(-3, 3), rng.vec(-3, 3)};
        const double T = rng.uniform(0.3, 5.0);
        const QuinticSegment seg(a, b, T);
        const auto k0 = seg.evaluate(0.0);
        const auto k1 = seg.evaluate(T);
        for (double r : {(k0.p - a.p).norm(), (k0.v - a.v).norm(), (k0.a - a.a).norm(), (k1.p - b.p).norm(),
                         (k1.v - b.v).norm(), (k1.a - b.a).norm()}) {
            worst = std::max(worst, r);
        }
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(Quintic, SampledEndpointsExact) {
    const Trajectory t =
        quintic_point_to_point(BoundaryState::at_rest({0, 0}), BoundaryState::at_rest({2, 1}), 2.0, 0.05);
    EXPECT_EQ(t.size(), 41u);
    EXPECT_EQ(t.front().p, Vec2{});
    EXPECT_EQ(t.back().p, (Vec2{2, 1}));
    EXPECT_EQ(t.back().v, Vec2{});
}

TEST(Quintic, RejectsBadDurations) {
    const auto a = BoundaryState::at_rest({0, 0});
    EXPECT_THROW(QuinticSegment(a, a, 0.0), InvalidArgument);
    EXPECT_THROW(QuinticSegment(a, a, -1.0), InvalidArgument);
    EXPECT_THROW(quintic_point_to_point(a, a, 0.05, 0.05), InvalidArgument);
    EXPECT_THROW(quintic_point_to_point(a, BoundaryState::at_rest({NAN, 0}), 1.0, 0.05), InvalidArgument);
}

// ─── Trajectory and metrics ──────────────────────────────────────────────────

TEST(Trajectory, ValidatesConstruction) {
    EXPECT_THROW(Trajectory(0.0, std::vector<State>(3)), InvalidArgument);
    EXPECT_THROW(Trajectory(0.1, std::vector<State>(1)), InvalidArgument);
    EXPECT_THROW(Trajectory(0.1, {State{}, State{{INFINITY, 0}, {}}}), InvalidArgument);
}

TEST(Trajectory, DistanceExamples) {
    const auto a = Trajectory::constant(0.1, 5, {{0, 0}, {}});
    const auto b = Trajectory::constant(0.1, 5, {{3, 4}, {}});
    EXPECT_EQ(max_distance(a, a), 0.0);
    EXPECT_EQ(max_distance(a, b), 5.0);
    const auto up = cooptraj::testing::line(0.1, 11, {0, 1}, {5, 1});
    const auto down = cooptraj::testing::line(0.1, 11, {0, -1}, {5, -1});
    EXPECT_EQ(max_distance(up, down), 2.0);
    EXPECT_EQ(distance(a, b, MetricKind::MeanSquaredDistance).value, 25.0);
}

TEST(Trajectory, DistanceIsPseudometric) {
    Rng rng(3);
    auto random_traj = [&] {
        std::vector<State> s(8);
        for (auto& x : s) x = {rng.vec(-2, 2), rng.vec(-1, 1)};
        return Trajectory(0.1, s);
    };
    for (int i = 0; i < 200; ++i) {
        const auto a = random_traj();
        const auto b = random_traj();
        const auto c = random_traj();
        EXPECT_EQ(max_distance(a, b), max_distance(b, a));
        EXPECT_LE(max_distance(a, c), max_distance(a, b) + max_distance(b, c) + 1e-12);
        EXPECT_GE(max_distance(a, b), 0.0);
    }
}

TEST(Trajectory, IncompatibleRaises) {
    const auto a = Trajectory::constant(0.1, 5, {});
    EXPECT_THROW((void)max_distance(a, Trajectory::constant(0.1, 6, {})), IncompatibleTrajectories);
    EXPECT_THROW((void)max_distance(a, Trajectory::constant(0.2, 5, {})), IncompatibleTrajectories);
}

TEST(Trajectory, AtTimeInterpolatesAndClamps) {
    const auto t = cooptraj::testing::line(0.5, 3, {0, 0}, {2, 0});
    EXPECT_EQ(t.at_time(-1).p, Vec2{});
    EXPECT_DOUBLE_EQ(t.at_time(0.25).p.x, 0.5);
    EXPECT_EQ(t.at_time(5).p, (Vec2{2, 0}));
}

TEST(Resample, SameDtIsIdentity) {
    const auto t = quintic_point_to_point(BoundaryState::at_rest({0, 0}), BoundaryState::at_rest({1, 2}), 1.0, 0.1);
    EXPECT_EQ(resample(t, 0.1), t);
}

TEST(Resample, ConstantStaysConstant) {
    const State s{{1.5, -0.5}, {}};
    const auto t = Trajectory::constant(0.1, 21, s);
    for (double dt : {0.03, 0.05, 0.07, 0.25}) {
        const auto r = resample(t, dt);
        for (const auto& x : r.samples()) EXPECT_EQ(x, s);
    }
}

TEST(Resample, StraightLineMidpointsStayOnLine) {
    const auto t = cooptraj::testing::line(1.0, 3, {0, 0}, {2, 4});
    const auto r = resample(t, 0.5);
    ASSERT_EQ(r.size(), 5u);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double u = 0.5 * static_cast<double>(i);
        EXPECT_DOUBLE_EQ(r[i].p.x, u);
        EXPECT_DOUBLE_EQ(r[i].p.y, 2 * u);
    }
}

TEST(Resample, RejectsStepLongerThanDuration) {
    const auto t = Trajectory::constant(0.1, 3, {});
    EXPECT_THROW((void)resample(t, 0.2), InvalidArgument);
    EXPECT_THROW((void)resample(t, 0.0), InvalidArgument);
}

TEST(Trajectory, JsonRoundTripIsBitExact) {
    Rng rng(5);
    std::vector<State> s(17);
    for (auto& x : s) x = {rng.vec(-10, 10), rng.vec(-1, 1)};
    const Trajectory t(1.0 / 30.0, s);
    EXPECT_EQ(trajectory_from_json(Json::parse(dump(to_json(t)))), t);
}

TEST(Trajectory, MalformedJsonRejected) {
    EXPECT_THROW((void)trajectory_from_json(Json::parse(R"({"dt": 0.1})")), SchemaError);
    EXPECT_THROW((void)trajectory_from_json(Json::parse(R"({"dt": 0.1, "samples": [{"p": [1], "v": [0, 0]}]})")),
                 SchemaError);
}

// ─── Safety geometry ─────────────────────────────────────────────────────────

TEST(Safety, LinePastDisc) {
    const SafetyEnvelope env{std::nullopt, {Disc{{0, 0}, 0.5}}};
    const auto above = cooptraj::testing::line(0.1, 41, {-2, 1}, {2, 1});
    const auto through = cooptraj::testing::line(0.1, 41, {-2, 0}, {2, 0});
    const auto r1 = check_safety(above, env);
    EXPECT_TRUE(r1.safe);
    EXPECT_NEAR(r1.min_clearance, 0.5, 1e-15);
    const auto r2 = check_safety(through, env);
    EXPECT_FALSE(r2.safe);
    EXPECT_NEAR(r2.min_clearance, -0.5, 1e-15);
}

TEST(Safety, ProjectionLandsOnEnvelope) {
    const SafetyEnvelope env{Corridor{0.0, 2.0}, {Disc{{3, 0}, 0.5}}};
    Rng rng(9);
    for (int i = 0; i < 500; ++i) {
        const Vec2 p = rng.vec(-4, 4);
        const Vec2 q = project_to_envelope(p, env);
        EXPECT_GE(env.clearance(q), -1e-12);
        if (env.clearance(p) >= 0) EXPECT_EQ(q, p);
    }
}
