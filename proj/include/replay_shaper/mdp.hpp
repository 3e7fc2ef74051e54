#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace replay_shaper {

using Rng = std::mt19937_64;

/// One possible outcome of taking an action: next state, reward, probability.
struct KernelEntry {
    int next_state = 0;
    double reward = 0.0;
    double prob = 0.0;
};

/// Finite MDP with a joint next-state/reward kernel q(s',r|s,a).
///
/// Entries within one (s,a) are unique on (next_state, reward); duplicates
/// are merged by summing probabilities at construction. Terminal states have
/// no outgoing entries. Immutable after build(); safe to share across threads.
class TabularMdp {
  public:
    TabularMdp(int num_states, int num_actions, double gamma);

    /// Adds one kernel outcome; merges with an existing (s',r) duplicate.
    void add_entry(int s, int a, int next_state, double reward, double prob);
    void set_terminal(int s);

    /// Validates invariants (probability normalization, reward bounds,
    /// terminal rows empty) and freezes the model. Throws on violation.
    void build();

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    double gamma() const { return gamma_; }
    double r_min() const { return r_min_; }
    double r_max() const { return r_max_; }
    bool is_terminal(int s) const { return terminal_[s]; }
    const std::set<int>& terminal_states() const { return terminal_set_; }

    const std::vector<KernelEntry>& entries(int s, int a) const {
        return kernel_[s * num_actions_ + a];
    }

    /// Expected immediate reward R(s,a).
    double expected_reward(int s, int a) const;

    /// Population variance of the marginal reward distribution at (s,a).
    /// Throws for terminal states, where the variance is undefined.
    double reward_variance(int s, int a) const;

    /// S_{r_min}(s,a): next-states reachable with the minimal reward in this
    /// pair's support, and that minimal reward.
    std::pair<std::vector<int>, double> min_reward_support(int s, int a) const;

    /// Draws one kernel outcome. Deterministic under a fixed rng state.
    std::pair<int, double> sample_step(Rng& rng, int s, int a) const;

    /// Non-terminal state ids, ascending.
    std::vector<int> nonterminal_states() const;

  private:
    void check_nonterminal(int s, int a) const;

    int num_states_;
    int num_actions_;
    double gamma_;
    double r_min_ = 0.0;
    double r_max_ = 0.0;
    std::vector<std::vector<KernelEntry>> kernel_;
    std::vector<bool> terminal_;
    std::set<int> terminal_set_;
    bool built_ = false;
};

/// Grid geometry and reward layout for the two benchmark environments.
/// Cells are (row, col); state id = row * cols + col. Actions are
/// 0=up, 1=down, 2=left, 3=right.
struct GridWorldSpec {
    int rows = 0;
    int cols = 0;
    std::set<int> goal_cells;
    std::set<int> cliff_cells;
    std::vector<std::pair<int, int>> risky_pairs;  // (cell, action)
    double slip_prob = 0.0;
    bool slip_excludes_intended = false;
    double step_reward = -1.0;
    double goal_reward = 0.0;
    double cliff_reward = 0.0;
    double risky_low_reward = 0.0;
    double risky_high_reward = 0.0;
    double risky_low_prob = 0.0;
    int far_start = -1;  // designated start for path diagnostics

    int cell(int row, int col) const { return row * cols + col; }
    int row_of(int s) const { return s / cols; }
    int col_of(int s) const { return s % cols; }

    std::string to_json() const;
    static GridWorldSpec from_json(const std::string& text);
};

constexpr int kActionUp = 0;
constexpr int kActionDown = 1;
constexpr int kActionLeft = 2;
constexpr int kActionRight = 3;

/// 4x5 grid with deterministic moves. Risky 'right' actions on the top row
/// pay {-100 w.p. 0.4, +100 w.p. 0.6}; every transition entering the goal
/// pays +150; everything else -1. Goal is terminal.
///
/// Default gamma is 0.9: above roughly 0.94 the expected-return optimum is
/// to cycle on the risky corridor forever (+20 expected per risky step
/// outgrows the one-off +150), and the intended shortest-path-to-goal
/// structure disappears.
std::pair<TabularMdp, GridWorldSpec> build_env1(
    double gamma = 0.9, const std::optional<GridWorldSpec>& overrides = std::nullopt);

/// 4x6 cliff grid. Actions succeed w.p. 0.9 and otherwise slip in a uniformly
/// random direction; moves into the goal are deterministic. Cliff cells are
/// terminal and pay -12, the goal pays +10, everything else -1.
std::pair<TabularMdp, GridWorldSpec> build_env2(
    double gamma = 0.95, const std::optional<GridWorldSpec>& overrides = std::nullopt);

/// Builds the TabularMdp described by an arbitrary GridWorldSpec.
/// Throws if the goal is unreachable from some non-terminal cell.
TabularMdp build_grid_mdp(const GridWorldSpec& spec, double gamma);

}  // namespace replay_shaper
