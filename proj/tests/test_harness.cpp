#include <gtest/gtest.h>

#include "cooptraj/harness.hpp"
#include "support.hpp"

using namespace cooptraj;
using cooptraj::testing::Rng;

namespace {

Scenario random_scenario(Rng& rng, int index) {
    Scenario s;
    s.id = "random-" + std::to_string(index);
    s.seed = static_cast<std::uint64_t>(rng.integer(0, 1 << 30));
    s.start = {rng.vec(-1, 1), rng.vec(-0.5, 0.5), rng.vec(-0.5, 0.5)};
    s.human = {rng.vec(-5, 5), rng.uniform(0.5, 3.5), rng.uniform(0, 1), rng.uniform(0, 0.05)};
    s.automation_cost.goal = rng.vec(-5, 5);
    s.automation_cost.w_goal = rng.uniform(1, 1e6);
    s.automation_cost.w_effort = rng.uniform(0, 1);
    s.automation_cost.w_time = rng.uniform(0, 1) < 0.3 ? rng.uniform(0, 2) : 0.0;
    s.automation_cost.horizon = 4.0;
    if (rng.uniform(0, 1) < 0.3) s.automation_cost.corridor = SafetyEnvelope{Corridor{0.0, 20.0}, {}};
    switch (index % 6) {
        case 0: s.arbitration = LeaderFollower{}; break;
        case 1: s.arbitration = Superimposed{SafetyEnvelope{Corridor{rng.uniform(-1, 1), rng.uniform(1, 6)}, {}}}; break;
        case 2: s.arbitration = AdditiveControlled{SigmaSource::constant(rng.uniform(0, 1))}; break;
        case 3: s.arbitration = AdditiveControlled{SigmaSource::scripted({0.0, 1.0}, {rng.uniform(0, 1), 1.0})}; break;
        case 4: s.arbitration = AdditiveDeforming{rng.uniform(0, 3)}; break;
        default: {
            AgreementConfig c;
            c.scheme = rng.uniform(0, 1) < 0.5 ? AgreementScheme::IBR : AgreementScheme::Negotiation;
            c.lambda = rng.uniform(0.1, 5);
            c.concession_step = rng.uniform(0.1, 1);
            c.fallback = rng.uniform(0, 1) < 0.5 ? Fallback::StatusQuo : Fallback::Midpoint;
            c.automation_compliance = rng.uniform(0, 1);
            s.arbitration = Agreement{c};
        }
    }
    if (rng.uniform(0, 1) < 0.5) s.envelope = SafetyEnvelope{std::nullopt, {Disc{rng.vec(-2, 2), rng.uniform(0.1, 1)}}};
    s.sim = {0.05, 0.01, rng.uniform(2, 8), {rng.uniform(1, 6), rng.uniform(1, 6)}, {4, 4}, std::nullopt};
    if (rng.uniform(0, 1) < 0.2) s.sim.u_max = rng.uniform(1, 10);
    s.estimation = {static_cast<std::size_t>(rng.integer(6, 40)), 0.2, 8.0};
    s.references = static_cast<ReferenceMode>(rng.integer(0, 2));
    return s;
}

}  // namespace

TEST(Scenario, JsonRoundTrip) {
    Rng rng(1);
    for (int i = 0; i < 60; ++i) {
        const auto s = random_scenario(rng, i);
        ASSERT_NO_THROW(s.validate());
        EXPECT_EQ(scenario_from_json(Json::parse(dump(to_json(s)))), s) << s.id;
    }
    for (const char* name : {"tug-of-war", "unsafe-blend", "negotiation-demo"}) {
        const auto s = *packaged_scenario(name);
        EXPECT_EQ(scenario_from_json(Json::parse(dump(to_json(s)))), s);
    }
}

TEST(Scenario, ValidationErrors) {
    auto j = to_json(tug_of_war_scenario());
    j["version"] = 2;
    EXPECT_THROW((void)scenario_from_json(j), SchemaError);
    auto k = to_json(tug_of_war_scenario());
    k.erase("human");
    EXPECT_THROW((void)scenario_from_json(k), SchemaError);
    Scenario bad = tug_of_war_scenario();
    bad.sim.dt_sim = 0.03;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    EXPECT_THROW((void)run_scenario(bad), InvalidArgument);
}

TEST(RunScenario, IdenticalGoalsAgreeAtOnce) {
    Scenario s = negotiation_demo_scenario();
    s.human.desired_goal = s.automation_cost.goal;
    s.human.desired_duration = s.automation_cost.horizon;
    const auto r = run_scenario(s);
    ASSERT_TRUE(r.agreement);
    EXPECT_TRUE(r.agreement->agreed);
    EXPECT_EQ(r.agreement->rounds, 1);
    EXPECT_EQ(r.summary.max_conflict, 0.0);
}

TEST(RunScenario, TugOfWarMatchesAnalyticConflict) {
    const auto r = run_scenario(tug_of_war_scenario());
    // oracle: u_H = kp (r_H - r_A) / 2 = 4, conflict = 16
    EXPECT_NEAR(r.summary.steady_state_conflict, 16.0, 1e-3);
    EXPECT_NEAR(r.summary.final_position.norm(), 0.0, 1e-3);
}

TEST(RunScenario, UnsafeBlendFlagged) {
    const Scenario s = unsafe_blend_scenario();
    const auto r = run_scenario(s);
    const auto n = s.horizon_samples();
    const auto t_auto = plan(s.start, s.automation_cost, s.sim.dt).trajectory;
    const auto t_human = conform_to(r.estimate.trajectory, n);
    EXPECT_GE(check_safety(t_auto, *s.envelope).min_clearance, 0.5);
    EXPECT_GE(check_safety(t_human, *s.envelope).min_clearance, 0.5);
    EXPECT_FALSE(r.safe);
    EXPECT_LE(r.min_clearance, -0.4);
    // oracle: recompute the blend independently
    const auto blend = combine(t_human, 0.5, t_auto, 0.5);
    EXPECT_EQ(check_safety(blend, *s.envelope).min_clearance, r.min_clearance);
}

TEST(RunScenario, Deterministic) {
    for (const char* name : {"tug-of-war", "unsafe-blend", "negotiation-demo"}) {
        const auto s = *packaged_scenario(name);
        const auto a = run_scenario(s);
        const auto b = run_scenario(s);
        EXPECT_EQ(dump(to_json(a)), dump(to_json(b)));
        EXPECT_EQ(trace_csv(a.trace), trace_csv(b.trace));
        EXPECT_EQ(a.transcript, b.transcript);
    }
}

TEST(RunScenario, SeedChangesNoisyRuns) {
    Scenario s = tug_of_war_scenario();
    const auto a = run_scenario(s);
    s.seed = 99;
    const auto b = run_scenario(s);
    EXPECT_NE(a.estimate.goal_estimate, b.estimate.goal_estimate);
}

TEST(RunScenario, RuntimeFailureCarriesScenario) {
    Scenario s = tug_of_war_scenario();
    s.sim.gains_A = {1e300, 1e300};
    s.sim.dt_sim = 0.05;
    try {
        (void)run_scenario(s);
        FAIL() << "expected ScenarioError";
    } catch (const ScenarioError& e) {
        EXPECT_EQ(e.scenario, "tug-of-war");
    }
}

TEST(Matrix, SingleRowEqualsReport) {
    const auto s = tug_of_war_scenario();
    const auto rows = run_matrix({s}, 1);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(matrix_csv(rows), matrix_csv({summary_row(run_scenario(s))}));
}

TEST(Matrix, DeterministicAcrossThreads) {
    const auto sweep = policy_sweep(negotiation_demo_scenario());
    const auto one = matrix_csv(run_matrix(sweep, 2, 1));
    const auto again = matrix_csv(run_matrix(sweep, 2, 1));
    const auto four = matrix_csv(run_matrix(sweep, 2, 4));
    EXPECT_EQ(one, again);
    EXPECT_EQ(one, four);
}

TEST(Matrix, FailedScenarioBecomesRow) {
    Scenario bad = tug_of_war_scenario();
    bad.id = "diverges";
    bad.sim.gains_A = {1e300, 1e300};
    bad.sim.dt_sim = 0.05;
    const auto rows = run_matrix({bad, tug_of_war_scenario()}, 1);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].status, "failed");
    EXPECT_FALSE(rows[0].error.empty());
    EXPECT_EQ(rows[1].status, "ok");
    const auto agg = aggregate_by_policy(rows);
    ASSERT_EQ(agg.size(), 1u);
    EXPECT_EQ(agg[0].failed, 1);
}

TEST(Matrix, AgreementLowestInPolicySweep) {
    for (const auto& base : {tug_of_war_scenario(), negotiation_demo_scenario()}) {
        const auto rows = run_matrix(policy_sweep(base), 1);
        const auto agg = aggregate_by_policy(rows);
        double agreement = std::numeric_limits<double>::infinity();
        double others = std::numeric_limits<double>::infinity();
        for (const auto& a : agg) {
            (a.policy == "agreement" ? agreement : others) =
                std::min(a.policy == "agreement" ? agreement : others, a.mean_steady_state_conflict);
        }
        EXPECT_LT(agreement, others) << base.id;
        EXPECT_LT(agreement, 1e-6) << base.id;
    }
}

TEST(Matrix, RejectsEmptyInput) {
    EXPECT_THROW((void)run_matrix({}, 1), InvalidArgument);
    EXPECT_THROW((void)run_matrix({tug_of_war_scenario()}, 0), InvalidArgument);
}
