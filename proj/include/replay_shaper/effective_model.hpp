#pragma once

#include <string>
#include <utility>
#include <vector>

#include "replay_shaper/mdp.hpp"
#include "replay_shaper/qtable.hpp"
#include "replay_shaper/replay.hpp"

namespace replay_shaper {

/// The biased transition/reward model (p_tilde, r_tilde) induced by mixing
/// environment steps with replayed experience at rate v. Terminal states
/// carry no rows; r_tilde is stored only where p_tilde > 0.
struct EffectiveModel {
    int num_states = 0;
    int num_actions = 0;
    double v = 0.0;
    double gamma = 0.0;
    std::vector<bool> terminal;
    // per (s,a): sparse rows of (next_state, p_tilde, r_tilde), sorted by next_state
    struct Row {
        int next_state = 0;
        double p = 0.0;
        double r = 0.0;
    };
    std::vector<std::vector<Row>> rows;

    const std::vector<Row>& row(int s, int a) const { return rows[s * num_actions + a]; }

    std::string to_json() const;
};

/// phi_1 and phi_2 for one (s,a,s',r) tuple, sharing the denominator
/// (1-v)*1 + v*mass_w(s,a). Throws when the denominator is zero.
std::pair<double, double> phi_pair(const TabularMdp& mdp, const WeightFunction& w, double v,
                                   int s, int a, int next_state, double reward);

/// Builds the full effective model. Requires v in [0,1).
EffectiveModel effective_model(const TabularMdp& mdp, const WeightFunction& w, double v);

/// One sweep of H: (HQ)(s,a) = sum_{s'} p_tilde * (r_tilde + gamma * max_b Q(s',b)).
/// Terminal rows map to 0. Parallelized over (s,a) rows with OpenMP.
QTable apply_h(const EffectiveModel& model, const QTable& q);

/// Single-threaded reference sweep; apply_h must match it exactly.
QTable apply_h_serial(const EffectiveModel& model, const QTable& q);

/// Banach iteration from Q = 0 until the sweep delta drops below
/// tol*(1-gamma)/gamma, which bounds the distance to the fixed point by tol.
/// Throws after 1e6 sweeps.
std::pair<QTable, int> fixed_point(const EffectiveModel& model, double tol = 1e-9);

/// Max over random Q-pairs of the contraction ratio ||HQ-HQbar|| / ||Q-Qbar||.
double contraction_check(const EffectiveModel& model, Rng& rng, int trials);

struct NoiseCheck {
    double mean = 0.0;
    double std_error = 0.0;
    double mean_sq = 0.0;
    double second_moment_bound = 0.0;  // K * (1 + ||Q||^2)
    long long n_samples = 0;
};

/// Samples the per-update noise e_t = r + gamma*max Q(s') - (HQ)(s,a) at a
/// fixed (s,a) under the env/replay mixture and reports its first two moments
/// against the martingale-difference and bounded-variance conditions.
NoiseCheck noise_term_check(const TabularMdp& mdp, const WeightFunction& w, double v,
                            const QTable& q, int s, int a, Rng& rng, long long n_samples);

/// Max over random Q of ||H1 Q - H2 Q||; the operator-level distance that
/// shrinks as the empirical weights approach their limit.
double mapping_distance(const EffectiveModel& m1, const EffectiveModel& m2, Rng& rng,
                        int trials);

}  // namespace replay_shaper
