#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "replay_shaper/effective_model.hpp"
#include "replay_shaper/mdp.hpp"
#include "replay_shaper/qtable.hpp"
#include "replay_shaper/replay.hpp"

namespace replay_shaper {

/// Assumption 1 diagnostics for a candidate replay distribution.
struct Assumption1Report {
    bool variance_monotone = false;  // bullet 1: pair mass increases with true variance
    bool reward_monotone = false;    // bullet 2: within a pair, lower rewards get more mass
    double concentration_gap = 0.0;  // bullet 3: max-variance pair vs exact concentration
    std::vector<std::string> violations;

    std::string to_json() const;
};

Assumption1Report check_assumption1(const WeightFunction& w, const TabularMdp& mdp);

/// Theorem 2 evaluation at one (s_i, a_i): the closed three-term bound against
/// the fixed points with and without replay.
struct SwitchCandidate {
    int action = 0;
    double lhs_gap = 0.0;  // Q*_{v=0}(s_i,a_i) - Q*_{v=0}(s_i,b)
    bool predicted = false;
};

struct SwitchReport {
    int state = 0;
    int baseline_action = 0;
    double rhs_bound = 0.0;  // shared across candidates
    std::vector<SwitchCandidate> candidates;
    bool predicted_switch = false;  // any candidate satisfies the inequality
    bool actual_switch = false;     // argmax at s_i moved away from a_i
    double q0_baseline = 0.0;       // Q*_{v=0}(s_i,a_i)
    double qstar_baseline = 0.0;    // Q*(s_i,a_i)

    std::string to_json() const;
};

/// Evaluates Theorem 2 as printed: rhs = v(R - r_min)
/// + gamma*sum p*(max Q*_0 - max Q*) + v*gamma*(sum p*max Q* - avg over
/// S_{r_min} of max Q*). r_min and S_{r_min} are taken at (s_i,a_i).
/// Requires a_i to be the unique argmax of Q*_{v=0}(s_i, .).
SwitchReport theorem2_report(const TabularMdp& mdp, double v, const WeightFunction& w_inf,
                             int s_i, int a_i);

/// Appendix E closed form for Q*(s_i,a_i) under the exactly-concentrated
/// limit weights, evaluated from the rest of Q*.
double limit_q_closed_form(const TabularMdp& mdp, double v, int s_i, int a_i,
                           const QTable& q_star);

struct RiskMetrics {
    double mean_return = 0.0;
    double return_std = 0.0;
    double risky_traversal_prob = 0.0;  // any step on a pair above the variance threshold
    double catastrophe_prob = 0.0;      // episode ended in a catastrophic terminal
    long long episodes = 0;

    std::string to_json() const;
};

/// Monte Carlo rollouts of a fixed policy from uniform random non-terminal
/// starts. Episodes are seeded independently, so results do not depend on the
/// number of OpenMP threads.
RiskMetrics policy_risk_profile(const TabularMdp& mdp, const std::vector<int>& policy,
                                const std::set<int>& catastrophic_states,
                                double variance_threshold, long long n_episodes,
                                std::uint64_t seed, int max_steps = 0);

/// Deterministic rollout following the policy and the most likely transition;
/// returns the visited (s,a) pairs. Stops at terminals, the cap, or a revisit.
std::vector<std::pair<int, int>> greedy_path(const TabularMdp& mdp,
                                             const std::vector<int>& policy, int start,
                                             int max_steps = 200);

}  // namespace replay_shaper
