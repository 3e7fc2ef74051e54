#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "replay_shaper/mdp.hpp"
#include "replay_shaper/qtable.hpp"
#include "replay_shaper/replay.hpp"

namespace replay_shaper {

struct GlieSchedule {
    double c = 1.0;
    double p = 0.5;  // p=0 gives constant epsilon; flagged in the log as non-GLIE
};

struct LearnerConfig {
    double v = 0.5;               // replay probability
    double gamma = 0.95;
    int t0 = 500;                 // initial pure-exploration environment steps
    double alpha_exponent = 0.6;
    double c0 = 0.0;              // Q initialization
    long long episodes = 50000;
    int max_steps_per_episode = 0;  // 0: defaults to 10 * num_states
    GlieSchedule glie;
    std::uint64_t seed = 0;
    bool global_t_alpha = false;  // literal (1/t)^0.6 instead of per-pair counts
    long long max_total_iterations = 0;  // 0: unlimited; else stop mid-episode at this count
    std::vector<long long> checkpoint_iterations;  // iterations at which to snapshot
    const WeightFunction* frozen_weights = nullptr;  // used when scheme kind is frozen
};

struct Checkpoint {
    long long iteration = 0;
    QTable q;
    double weight_distance_to_limit = -1.0;  // -1 when no limit was supplied
};

struct RunLog {
    std::vector<double> episode_returns;
    std::vector<int> episode_steps;
    long long replay_count = 0;
    long long env_steps = 0;
    long long total_iterations = 0;
    std::vector<Checkpoint> checkpoints;
    bool non_glie_schedule = false;

    std::string to_csv() const;  // episode, return, steps
};

struct RunResult {
    QTable q;
    RunLog log;
    BufferStats buffer;
};

/// One tabular Q-learning backup on a single entry.
void q_update(QTable& q, int s, int a, double r, int next_state, bool next_terminal,
              double alpha, double gamma);

/// (1/visit_count)^alpha_exponent; visit_count counts both real and replay
/// updates of the pair.
double learning_rate(long long visit_count, double alpha_exponent);

/// epsilon(s) = min(1, c / (1 + n(s))^p).
double glie_epsilon(long long state_visit_count, const GlieSchedule& schedule);

/// Algorithm 1. Phase one is cfg.t0 uniformly random environment steps; after
/// that each iteration replays a stored transition w.p. v or takes one
/// epsilon-greedy environment step. Episodes start at uniform random
/// non-terminal states. v=0 reproduces plain Q-learning on the same RNG
/// stream bit for bit. Optionally compares checkpoint weights against
/// `limit` for the Lemma 4 convergence log.
RunResult run_algorithm1(const TabularMdp& mdp, const LearnerConfig& cfg,
                         const SchemeConfig& scheme,
                         const WeightFunction* limit = nullptr);

/// Convenience wrapper: run_algorithm1 with v forced to 0.
RunResult run_plain_q(const TabularMdp& mdp, LearnerConfig cfg);

/// Argmax per state, ties toward the lowest action index. Terminal states get
/// action 0.
std::vector<int> greedy_policy(const QTable& q);

}  // namespace replay_shaper
