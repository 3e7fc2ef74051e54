#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "doctest.h"
#include "replay_shaper/effective_model.hpp"
#include "replay_shaper/safety.hpp"
#include "replay_shaper/verify.hpp"

using namespace replay_shaper;

namespace {

// s0 with a risky action (reward {-100 w.p. 0.4, +100 w.p. 0.6}) and a safe
// alternative with deterministic reward, both into the terminal state.
TabularMdp risky_vs_safe(double safe_reward) {
    TabularMdp mdp(2, 2, 0.9);
    mdp.add_entry(0, 0, 1, -100.0, 0.4);
    mdp.add_entry(0, 0, 1, 100.0, 0.6);
    mdp.add_entry(0, 1, 1, safe_reward, 1.0);
    mdp.set_terminal(1);
    mdp.build();
    return mdp;
}

WeightFunction concentrated_on_risky() {
    return WeightFunction(std::map<TransitionKey, double>{{{0, 0, 1, -100.0}, 1.0}},
                          WeightFunction::Provenance::limiting);
}

}  // namespace

TEST_CASE("check_assumption1 on the env1 limiting weights") {
    auto [mdp, spec] = build_env1();
    (void)spec;
    auto report = check_assumption1(limiting_weights(mdp, 5.0), mdp);
    CHECK(report.variance_monotone);
    CHECK(report.reward_monotone);
    CHECK(report.violations.empty());
}

TEST_CASE("check_assumption1 flags a count-proportional scheme") {
    auto [mdp, spec] = build_env1();
    BufferStats stats(mdp.num_states(), mdp.num_actions());
    auto [cell, action] = spec.risky_pairs.front();
    int succ = mdp.entries(cell, action)[0].next_state;
    // risky pair observed at its kernel frequencies: +100 outweighs -100
    for (int i = 0; i < 4; ++i) stats.record_transition(cell, action, -100.0, succ);
    for (int i = 0; i < 6; ++i) stats.record_transition(cell, action, 100.0, succ);
    SchemeConfig cfg;
    cfg.kind = SchemeKind::uniform;
    auto report = check_assumption1(replay_weights(stats, cfg), mdp);
    CHECK(!report.reward_monotone);
    CHECK(!report.violations.empty());
}

TEST_CASE("check_assumption1 concentration gap is 0 at the exact limit") {
    auto mdp = risky_vs_safe(10.0);
    auto report = check_assumption1(concentrated_on_risky(), mdp);
    CHECK(report.concentration_gap == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("theorem2_report with v=0 predicts and observes nothing") {
    auto mdp = risky_vs_safe(10.0);
    auto report = theorem2_report(mdp, 0.0, concentrated_on_risky(), 0, 0);
    CHECK(report.rhs_bound == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(!report.predicted_switch);
    CHECK(!report.actual_switch);
    CHECK(report.q0_baseline == doctest::Approx(report.qstar_baseline).epsilon(1e-8));
}

TEST_CASE("theorem2_report detects the hand-built switch") {
    // Q*_{v=0}: risky 20 vs safe 10, gap 10. All successors terminal, so the
    // bound collapses to v*(R - r_min) = 0.5 * 120 = 60 > 10: switch expected.
    auto mdp = risky_vs_safe(10.0);
    auto report = theorem2_report(mdp, 0.5, concentrated_on_risky(), 0, 0);
    CHECK(report.q0_baseline == doctest::Approx(20.0).epsilon(1e-8));
    CHECK(report.rhs_bound == doctest::Approx(60.0).epsilon(1e-8));
    REQUIRE(report.candidates.size() == 1);
    CHECK(report.candidates[0].lhs_gap == doctest::Approx(10.0).epsilon(1e-8));
    CHECK(report.predicted_switch);
    CHECK(report.actual_switch);
    // Q*(s0,a0) = 0.5*20 + 0.5*(-100) = -40
    CHECK(report.qstar_baseline == doctest::Approx(-40.0).epsilon(1e-8));
}

TEST_CASE("theorem2_report with the alternative degraded past the bound") {
    // safe reward -50: gap = 70 > 60, inequality fails, and indeed
    // Q*(s0,a0) = -40 still beats -50.
    auto mdp = risky_vs_safe(-50.0);
    auto report = theorem2_report(mdp, 0.5, concentrated_on_risky(), 0, 0);
    CHECK(!report.predicted_switch);
    CHECK(!report.actual_switch);
}

TEST_CASE("theorem2_report rejects a non-unique baseline argmax") {
    TabularMdp mdp(2, 2, 0.9);
    mdp.add_entry(0, 0, 1, 5.0, 1.0);
    mdp.add_entry(0, 1, 1, 5.0, 1.0);
    mdp.set_terminal(1);
    mdp.build();
    CHECK_THROWS(theorem2_report(mdp, 0.5, concentrated_on_risky(), 0, 0));
}

TEST_CASE("limit_q_closed_form cross-validates the fixed point") {
    Rng rng(31);
    for (int i = 0; i < 10; ++i) {
        auto inst = make_switch_instance(rng);
        const double v = 0.5;
        auto [q_star, iters] = fixed_point(effective_model(inst.mdp, inst.w_inf, v), 1e-10);
        (void)iters;
        double closed = limit_q_closed_form(inst.mdp, v, inst.s_i, inst.a_i, q_star);
        CHECK(std::abs(closed - q_star(inst.s_i, inst.a_i)) <= 1e-8);
    }
}

TEST_CASE("limit_q_closed_form at v=0 is the Bellman value") {
    auto mdp = risky_vs_safe(10.0);
    auto [q0, iters] = fixed_point(effective_model(mdp, WeightFunction(), 0.0), 1e-10);
    (void)iters;
    double closed = limit_q_closed_form(mdp, 0.0, 0, 0, q0);
    CHECK(closed == doctest::Approx(q0(0, 0)).epsilon(1e-10));
    CHECK(closed == doctest::Approx(20.0).epsilon(1e-8));
}

TEST_CASE("limit Q-value is non-increasing in v") {
    Rng rng(33);
    auto inst = make_switch_instance(rng);
    double prev = 1e300;
    for (double v : {0.0, 0.2, 0.4, 0.6, 0.8}) {
        auto [q, iters] = fixed_point(effective_model(inst.mdp, inst.w_inf, v), 1e-10);
        (void)iters;
        CHECK(q(inst.s_i, inst.a_i) <= prev + 1e-9);
        prev = q(inst.s_i, inst.a_i);
    }
}

TEST_CASE("policy_risk_profile separates safe and risky env1 policies") {
    auto [mdp, spec] = build_env1();
    std::vector<int> safe(mdp.num_states(), kActionRight);
    for (int col = 0; col < 3; ++col) safe[spec.cell(0, col)] = kActionDown;
    for (int row = 1; row < spec.rows; ++row) safe[spec.cell(row, 4)] = kActionUp;

    std::vector<int> risky(mdp.num_states(), kActionUp);
    for (int col = 0; col < 4; ++col) risky[spec.cell(0, col)] = kActionRight;

    auto safe_metrics = policy_risk_profile(mdp, safe, {}, 100.0, 4000, 1);
    CHECK(safe_metrics.risky_traversal_prob == 0.0);
    CHECK(safe_metrics.catastrophe_prob == 0.0);

    auto risky_metrics = policy_risk_profile(mdp, risky, {}, 100.0, 4000, 1);
    // corridor starts (columns 0-2) are 12 of 19 non-terminal cells
    CHECK(risky_metrics.risky_traversal_prob == doctest::Approx(12.0 / 19.0).epsilon(0.05));
}

TEST_CASE("policy_risk_profile on a deterministic single-start chain") {
    TabularMdp mdp(2, 1, 0.9);
    mdp.add_entry(0, 0, 1, 5.0, 1.0);
    mdp.set_terminal(1);
    mdp.build();
    auto m = policy_risk_profile(mdp, {0, 0}, {}, 100.0, 500, 3);
    CHECK(m.mean_return == doctest::Approx(5.0));
    CHECK(m.return_std == doctest::Approx(0.0));
}

TEST_CASE("policy_risk_profile counts catastrophic terminals") {
    auto [mdp, spec] = build_env2();
    std::vector<int> into_cliff(mdp.num_states(), kActionDown);
    auto m = policy_risk_profile(mdp, into_cliff, spec.cliff_cells, 100.0, 4000, 7);
    CHECK(m.catastrophe_prob > 0.5);
}

TEST_CASE("greedy_path follows the policy to the goal") {
    auto [mdp, spec] = build_env1();
    std::vector<int> safe(mdp.num_states(), kActionRight);
    for (int col = 0; col < 3; ++col) safe[spec.cell(0, col)] = kActionDown;
    for (int row = 1; row < spec.rows; ++row) safe[spec.cell(row, 4)] = kActionUp;

    auto path = greedy_path(mdp, safe, spec.far_start);
    REQUIRE(!path.empty());
    CHECK(path.front().first == spec.far_start);
    for (auto [s, a] : path)
        for (auto [cell, action] : spec.risky_pairs) CHECK(!(s == cell && a == action));
    // last step enters the goal
    auto [last_s, last_a] = path.back();
    CHECK(mdp.entries(last_s, last_a)[0].next_state == *spec.goal_cells.begin());
}
