#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "replay_shaper/baselines.hpp"
#include "replay_shaper/effective_model.hpp"
#include "replay_shaper/mdp.hpp"

using namespace replay_shaper;

namespace {

// deterministic 3-state chain: s0 -a0-> s1 (r=-1), s1 -a0-> terminal (r=4);
// a1 loops in place with r=-2
TabularMdp det_chain() {
    TabularMdp mdp(3, 2, 0.9);
    mdp.add_entry(0, 0, 1, -1.0, 1.0);
    mdp.add_entry(0, 1, 0, -2.0, 1.0);
    mdp.add_entry(1, 0, 2, 4.0, 1.0);
    mdp.add_entry(1, 1, 1, -2.0, 1.0);
    mdp.set_terminal(2);
    mdp.build();
    return mdp;
}

}  // namespace

TEST_CASE("kappa=0 reproduces plain Q-learning bit for bit") {
    auto [mdp, spec] = build_env1();
    (void)spec;
    LearnerConfig base;
    base.gamma = mdp.gamma();
    base.episodes = 400;
    base.seed = 21;

    RiskSensitiveConfig cfg;
    cfg.base = base;
    cfg.kappa = 0.0;
    auto rs = run_risk_sensitive_q(mdp, cfg);
    auto plain = run_plain_q(mdp, base);
    CHECK(rs.q.data() == plain.q.data());
    CHECK(rs.log.episode_returns == plain.log.episode_returns);
}

TEST_CASE("asymmetric TD scaling on a single observed transition") {
    // one non-terminal state, one action, reward 2 into the terminal: the
    // first update sees alpha=1 and delta=2, so Q = (1-kappa)*2
    TabularMdp mdp(2, 1, 0.9);
    mdp.add_entry(0, 0, 1, 2.0, 1.0);
    mdp.set_terminal(1);
    mdp.build();

    RiskSensitiveConfig cfg;
    cfg.base.gamma = 0.9;
    cfg.base.episodes = 1;
    cfg.base.t0 = 1;
    cfg.kappa = 0.5;
    auto res = run_risk_sensitive_q(mdp, cfg);
    CHECK(res.q(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("negative TD errors are amplified by 1+kappa") {
    TabularMdp mdp(2, 1, 0.9);
    mdp.add_entry(0, 0, 1, -2.0, 1.0);
    mdp.set_terminal(1);
    mdp.build();

    RiskSensitiveConfig cfg;
    cfg.base.gamma = 0.9;
    cfg.base.episodes = 1;
    cfg.base.t0 = 1;
    cfg.kappa = 0.5;
    auto res = run_risk_sensitive_q(mdp, cfg);
    CHECK(res.q(0, 0) == doctest::Approx(-3.0));
}

TEST_CASE("kappa outside (-1,1) is rejected") {
    auto mdp = det_chain();
    RiskSensitiveConfig cfg;
    cfg.kappa = 1.0;
    CHECK_THROWS(run_risk_sensitive_q(mdp, cfg));
}

TEST_CASE("risk-sensitive iterates respect the widened value bounds") {
    auto [mdp, spec] = build_env1();
    (void)spec;
    RiskSensitiveConfig cfg;
    cfg.base.gamma = mdp.gamma();
    cfg.base.episodes = 3000;
    cfg.base.seed = 2;
    cfg.kappa = 0.7;
    auto res = run_risk_sensitive_q(mdp, cfg);
    double scale = (1.0 + std::abs(cfg.kappa)) / (1.0 - cfg.base.gamma);
    for (double x : res.q.data()) {
        CHECK(x >= mdp.r_min() * scale - 1e-9);
        CHECK(x <= mdp.r_max() * scale + 1e-9);
    }
}

TEST_CASE("TD histogram is recorded when requested") {
    auto [mdp, spec] = build_env1();
    (void)spec;
    RiskSensitiveConfig cfg;
    cfg.base.gamma = mdp.gamma();
    cfg.base.episodes = 200;
    cfg.kappa = 0.3;
    cfg.record_td_histogram = true;
    auto res = run_risk_sensitive_q(mdp, cfg);
    long long total = 0;
    for (const auto& [bin, count] : res.td_histogram) total += count;
    CHECK(total == res.log.env_steps);

    cfg.record_td_histogram = false;
    CHECK(run_risk_sensitive_q(mdp, cfg).td_histogram.empty());
}

TEST_CASE("worst-case learning solves deterministic dynamics exactly") {
    auto mdp = det_chain();
    LearnerConfig cfg;
    cfg.gamma = 0.9;
    cfg.episodes = 5000;
    cfg.seed = 11;
    auto res = run_worst_case_q(mdp, cfg);

    auto [q_star, iters] = fixed_point(effective_model(mdp, WeightFunction(), 0.0), 1e-10);
    (void)iters;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a)
            CHECK(res.q(s, a) == doctest::Approx(q_star(s, a)).epsilon(1e-6));
}

TEST_CASE("worst-case values are non-increasing along a run") {
    // same seed, growing iteration budgets share the RNG prefix, so the
    // snapshots lie on one trajectory
    auto [mdp, spec] = build_env2();
    (void)spec;
    LearnerConfig cfg;
    cfg.gamma = mdp.gamma();
    cfg.episodes = 1000000;
    cfg.seed = 4;

    QTable prev;
    for (long long iters : {2000LL, 10000LL, 50000LL}) {
        cfg.max_total_iterations = iters;
        auto res = run_worst_case_q(mdp, cfg);
        if (prev.num_states() > 0)
            for (size_t i = 0; i < prev.data().size(); ++i)
                CHECK(res.q.data()[i] <= prev.data()[i] + 1e-9);
        prev = res.q;
    }
}

TEST_CASE("worst-case values a pair by its worst successor") {
    // s0 -a0-> {s1 w.p. 0.5, s2 w.p. 0.5}, both terminal, rewards 0 and 10:
    // the min-backup keeps the 0 branch once both are observed
    TabularMdp mdp(3, 1, 0.9);
    mdp.add_entry(0, 0, 1, 0.0, 0.5);
    mdp.add_entry(0, 0, 2, 10.0, 0.5);
    mdp.set_terminal(1);
    mdp.set_terminal(2);
    mdp.build();

    LearnerConfig cfg;
    cfg.gamma = 0.9;
    cfg.episodes = 2000;
    cfg.seed = 6;
    auto res = run_worst_case_q(mdp, cfg);
    CHECK(res.q(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
}
