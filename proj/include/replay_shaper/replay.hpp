#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "replay_shaper/mdp.hpp"

namespace replay_shaper {

/// A stored transition identity: (s, a, s', r).
using TransitionKey = std::tuple<int, int, int, double>;

enum class SchemeKind { variance_prioritized, uniform, none, frozen };

struct SchemeConfig {
    SchemeKind kind = SchemeKind::variance_prioritized;
    double beta = 5.0;       // softmin temperature over rewards
    bool zero_variance_fallback = true;  // uniform over stored tuples when all variances are 0
};

/// Normalized replay distribution over (s,a,s',r) tuples with finite support.
class WeightFunction {
  public:
    enum class Provenance { empirical, limiting, custom };

    WeightFunction() = default;
    explicit WeightFunction(std::map<TransitionKey, double> table,
                            Provenance provenance = Provenance::custom);

    double mass(const TransitionKey& key) const;
    double total_mass() const { return total_mass_; }
    double pair_mass(int s, int a) const;
    const std::map<TransitionKey, double>& table() const { return table_; }
    Provenance provenance() const { return provenance_; }
    bool empty() const { return table_.empty(); }

    /// Categorical draw over the support. Throws on zero total mass.
    TransitionKey sample(Rng& rng) const;

    std::string to_json() const;
    static WeightFunction from_json(const std::string& text);

  private:
    std::map<TransitionKey, double> table_;
    double total_mass_ = 0.0;
    Provenance provenance_ = Provenance::custom;
};

/// Max-absolute difference over the union of the two supports.
double weight_distance(const WeightFunction& a, const WeightFunction& b);

/// Replay buffer in sufficient-statistic form: per-(s,a) counts and reward
/// moments, the unique-reward sets M_t, and per-reward next-state sets L_t.
class BufferStats {
  public:
    BufferStats(int num_states, int num_actions);

    void record_transition(int s, int a, double r, int next_state);

    long long visit_count(int s, int a) const { return pair(s, a).n; }
    long long total_transitions() const { return total_; }

    /// Population variance (divide by n) of recorded rewards; 0 when n <= 1.
    double empirical_variance(int s, int a) const;
    double total_variance() const;

    /// M_t(r(s,a)): distinct rewards recorded at (s,a), ascending.
    std::vector<double> unique_rewards(int s, int a) const;
    /// L_t(s,a,r): distinct next-states recorded at (s,a) with reward r.
    std::vector<int> next_states(int s, int a, double r) const;
    long long tuple_count(int s, int a, int next_state, double r) const;

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }

    /// Draws directly from the scheme's current distribution without
    /// materializing the full weight table. Equivalent in law to
    /// sample_replay(replay_weights(*this, config), rng).
    TransitionKey sample(Rng& rng, const SchemeConfig& config) const;

  private:
    struct PairStats {
        long long n = 0;
        double reward_sum = 0.0;
        double reward_sq_sum = 0.0;
        // reward -> (next_state -> count); doubles as M_t and L_t
        std::map<double, std::map<int, long long>> by_reward;
    };

    const PairStats& pair(int s, int a) const { return pairs_[s * num_actions_ + a]; }
    PairStats& pair(int s, int a) { return pairs_[s * num_actions_ + a]; }

    friend WeightFunction replay_weights(const BufferStats&, const SchemeConfig&);

    int num_states_;
    int num_actions_;
    std::vector<PairStats> pairs_;
    std::vector<std::pair<int, int>> touched_;  // pairs with n > 0, insertion order
    long long total_ = 0;
    double variance_sum_ = 0.0;  // cached sum of per-pair empirical variances
};

/// The variance-prioritized replay distribution w_t built from buffer
/// statistics (or the uniform / zero alternatives). Throws on empty buffer.
WeightFunction replay_weights(const BufferStats& stats, const SchemeConfig& config);

/// The limiting distribution w^inf: true kernel variances, true reward
/// supports, softmin over each pair's support, uniform over S_r(s,a).
WeightFunction limiting_weights(const TabularMdp& mdp, double beta);

/// Categorical draw from a weight table. Thin wrapper kept as the public
/// sampling entry point.
TransitionKey sample_replay(const WeightFunction& weights, Rng& rng);

/// Softmin weights exp(-beta*r) normalized over `rewards`, computed in
/// log-space so |beta*r| up to 1e4 stays finite.
std::vector<double> softmin_weights(const std::vector<double>& rewards, double beta);

}  // namespace replay_shaper
