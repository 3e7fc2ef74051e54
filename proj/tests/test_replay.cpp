#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "doctest.h"
#include "replay_shaper/mdp.hpp"
#include "replay_shaper/replay.hpp"

using namespace replay_shaper;

TEST_CASE("record_transition maintains counts and support sets") {
    BufferStats stats(4, 2);
    stats.record_transition(0, 1, 5.0, 2);
    CHECK(stats.visit_count(0, 1) == 1);
    CHECK(stats.unique_rewards(0, 1) == std::vector<double>{5.0});
    CHECK(stats.next_states(0, 1, 5.0) == std::vector<int>{2});

    stats.record_transition(0, 1, 5.0, 2);
    CHECK(stats.tuple_count(0, 1, 2, 5.0) == 2);
    CHECK(stats.unique_rewards(0, 1).size() == 1);

    stats.record_transition(0, 1, 7.0, 3);
    CHECK(stats.unique_rewards(0, 1) == std::vector<double>{5.0, 7.0});
    // population variance of {5,5,7} = 8/9
    CHECK(stats.empirical_variance(0, 1) == doctest::Approx(8.0 / 9.0));
    CHECK(stats.total_transitions() == 3);
}

TEST_CASE("empirical_variance") {
    BufferStats stats(2, 1);
    CHECK(stats.empirical_variance(0, 0) == 0.0);  // n = 0
    stats.record_transition(0, 0, 0.0, 1);
    CHECK(stats.empirical_variance(0, 0) == 0.0);  // n = 1
    stats.record_transition(0, 0, 2.0, 1);
    CHECK(stats.empirical_variance(0, 0) == doctest::Approx(1.0));
    BufferStats flat(2, 1);
    for (int i = 0; i < 5; ++i) flat.record_transition(0, 0, 3.0, 1);
    CHECK(flat.empirical_variance(0, 0) == 0.0);
}

TEST_CASE("replay_weights hand-evaluated variance-prioritized case") {
    // pair A = (0,0) has rewards {0,2}, pair B = (1,0) has {0,0}
    BufferStats stats(3, 1);
    stats.record_transition(0, 0, 0.0, 2);
    stats.record_transition(0, 0, 2.0, 2);
    stats.record_transition(1, 0, 0.0, 2);
    stats.record_transition(1, 0, 0.0, 2);

    SchemeConfig cfg;
    cfg.beta = 1.0;
    auto w = replay_weights(stats, cfg);
    CHECK(w.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.pair_mass(0, 0) == doctest::Approx(1.0));
    CHECK(w.pair_mass(1, 0) == 0.0);
    double w0 = w.mass({0, 0, 2, 0.0});
    double w2 = w.mass({0, 0, 2, 2.0});
    CHECK(w2 / w0 == doctest::Approx(std::exp(-2.0)));
    CHECK(w0 + w2 == doctest::Approx(1.0));
}

TEST_CASE("zero-variance fallback is uniform over stored tuples") {
    BufferStats stats(3, 1);
    stats.record_transition(0, 0, 1.0, 1);
    stats.record_transition(0, 0, 1.0, 1);
    stats.record_transition(1, 0, -1.0, 2);
    auto w = replay_weights(stats, SchemeConfig{});
    CHECK(w.mass({0, 0, 1, 1.0}) == doctest::Approx(0.5));
    CHECK(w.mass({1, 0, 2, -1.0}) == doctest::Approx(0.5));
}

TEST_CASE("uniform scheme is proportional to stored counts") {
    BufferStats stats(3, 1);
    stats.record_transition(0, 0, 1.0, 1);
    stats.record_transition(0, 0, 1.0, 1);
    stats.record_transition(1, 0, 5.0, 2);
    SchemeConfig cfg;
    cfg.kind = SchemeKind::uniform;
    auto w = replay_weights(stats, cfg);
    CHECK(w.mass({0, 0, 1, 1.0}) == doctest::Approx(2.0 / 3.0));
    CHECK(w.mass({1, 0, 2, 5.0}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("replay_weights requires a non-empty buffer") {
    BufferStats stats(2, 1);
    CHECK_THROWS(replay_weights(stats, SchemeConfig{}));
}

TEST_CASE("limiting_weights on env1 concentrates on the risky pairs") {
    auto [mdp, spec] = build_env1();
    auto w = limiting_weights(mdp, 5.0);
    CHECK(w.total_mass() == doctest::Approx(1.0).epsilon(1e-12));

    double risky_mass = 0.0;
    for (auto [cell, action] : spec.risky_pairs) risky_mass += w.pair_mass(cell, action);
    CHECK(risky_mass == doctest::Approx(1.0).epsilon(1e-12));

    // within a risky pair the +100 branch underflows: e^{-5*100} vs e^{5*100}
    auto [cell, action] = spec.risky_pairs.front();
    int succ = mdp.entries(cell, action)[0].next_state;
    CHECK(w.mass({cell, action, succ, 100.0}) == 0.0);
    CHECK(w.mass({cell, action, succ, -100.0}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("limiting_weights with beta=0 is reward-uniform within a pair") {
    auto [mdp, spec] = build_env1();
    auto w = limiting_weights(mdp, 0.0);
    auto [cell, action] = spec.risky_pairs.front();
    int succ = mdp.entries(cell, action)[0].next_state;
    CHECK(w.mass({cell, action, succ, -100.0}) ==
          doctest::Approx(w.mass({cell, action, succ, 100.0})));
}

TEST_CASE("softmin_weights is finite in log space at extreme arguments") {
    auto w = softmin_weights({-1000.0, 0.0, 1000.0}, 10.0);  // |beta*r| = 1e4
    double sum = 0.0;
    for (double x : w) {
        CHECK(std::isfinite(x));
        CHECK(x >= 0.0);
        sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w[0] == doctest::Approx(1.0));

    auto flat = softmin_weights({3.0, 3.0}, 5.0);
    CHECK(flat[0] == doctest::Approx(0.5));
}

TEST_CASE("sample_replay determinism and frequencies") {
    std::map<TransitionKey, double> table;
    table[{0, 0, 1, 1.0}] = 0.5;
    table[{0, 0, 2, 2.0}] = 0.3;
    table[{1, 0, 0, -1.0}] = 0.2;
    WeightFunction w(table);

    Rng a(9), b(9);
    for (int i = 0; i < 50; ++i) CHECK(sample_replay(w, a) == sample_replay(w, b));

    Rng rng(17);
    std::map<TransitionKey, long long> counts;
    const long long n = 100000;
    for (long long i = 0; i < n; ++i) ++counts[sample_replay(w, rng)];
    for (const auto& [key, p] : table) {
        double phat = static_cast<double>(counts[key]) / n;
        double sigma = std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(phat - p) <= 3 * sigma);
    }

    WeightFunction single(std::map<TransitionKey, double>{{{2, 1, 3, 4.0}, 1.0}});
    Rng rng2(0);
    CHECK(single.sample(rng2) == TransitionKey{2, 1, 3, 4.0});

    WeightFunction empty;
    Rng rng3(0);
    CHECK_THROWS(empty.sample(rng3));
}

TEST_CASE("BufferStats::sample matches the materialized weight distribution") {
    auto [mdp, spec] = build_env1();
    (void)spec;
    BufferStats stats(mdp.num_states(), mdp.num_actions());
    Rng sim(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto nonterm = mdp.nonterminal_states();
    for (int i = 0; i < 2000; ++i) {
        int s = nonterm[static_cast<size_t>(unif(sim) * nonterm.size())];
        int a = static_cast<int>(unif(sim) * mdp.num_actions());
        auto [ns, r] = mdp.sample_step(sim, s, a);
        stats.record_transition(s, a, r, ns);
    }
    SchemeConfig cfg;
    auto w = replay_weights(stats, cfg);
    Rng rng(23);
    std::map<TransitionKey, long long> counts;
    const long long n = 50000;
    for (long long i = 0; i < n; ++i) ++counts[stats.sample(rng, cfg)];
    for (const auto& [key, p] : w.table()) {
        if (p < 1e-6) continue;
        double phat = static_cast<double>(counts[key]) / n;
        double sigma = std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(phat - p) <= 4 * sigma);
    }
}

TEST_CASE("weight_distance") {
    std::map<TransitionKey, double> t1{{{0, 0, 1, 1.0}, 0.6}, {{0, 0, 2, 2.0}, 0.4}};
    WeightFunction a(t1), b(t1);
    CHECK(weight_distance(a, b) == 0.0);

    WeightFunction c(std::map<TransitionKey, double>{{{0, 0, 1, 1.0}, 1.0}});
    WeightFunction d(std::map<TransitionKey, double>{{{1, 1, 0, 0.0}, 1.0}});
    CHECK(weight_distance(c, d) == 1.0);
}

TEST_CASE("empirical weights approach the limit on env1") {
    auto [mdp, spec] = build_env1();
    (void)spec;
    auto w_inf = limiting_weights(mdp, 5.0);
    BufferStats stats(mdp.num_states(), mdp.num_actions());
    Rng sim(20);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto nonterm = mdp.nonterminal_states();
    std::vector<double> dist;
    long long steps = 0;
    for (long long target : {1000LL, 10000LL, 100000LL}) {
        while (steps < target) {
            int s = nonterm[static_cast<size_t>(unif(sim) * nonterm.size())];
            int a = static_cast<int>(unif(sim) * mdp.num_actions());
            auto [ns, r] = mdp.sample_step(sim, s, a);
            stats.record_transition(s, a, r, ns);
            ++steps;
        }
        dist.push_back(weight_distance(replay_weights(stats, SchemeConfig{}), w_inf));
    }
    CHECK(dist[0] > dist[1]);
    CHECK(dist[1] > dist[2]);
    CHECK(dist[2] <= 0.01);
}

TEST_CASE("WeightFunction JSON round trip") {
    std::map<TransitionKey, double> t{{{0, 1, 2, -3.5}, 0.25}, {{4, 0, 1, 2.0}, 0.75}};
    WeightFunction w(t, WeightFunction::Provenance::limiting);
    auto round = WeightFunction::from_json(w.to_json());
    CHECK(weight_distance(w, round) == 0.0);
    CHECK(round.total_mass() == doctest::Approx(1.0));
}
