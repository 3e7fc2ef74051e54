#include "replay_shaper/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace replay_shaper {

namespace {
constexpr double kProbTol = 1e-12;
}

TabularMdp::TabularMdp(int num_states, int num_actions, double gamma)
    : num_states_(num_states),
      num_actions_(num_actions),
      gamma_(gamma),
      kernel_(static_cast<size_t>(num_states) * num_actions),
      terminal_(num_states, false) {
    if (num_states <= 0 || num_actions <= 0)
        throw std::invalid_argument("TabularMdp: state/action counts must be positive");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("TabularMdp: gamma must be in (0,1)");
}

void TabularMdp::add_entry(int s, int a, int next_state, double reward, double prob) {
    if (built_) throw std::logic_error("TabularMdp: frozen");
    if (prob <= 0.0 || prob > 1.0 + kProbTol)
        throw std::invalid_argument("TabularMdp: entry probability must be in (0,1]");
    auto& row = kernel_[s * num_actions_ + a];
    for (auto& e : row) {
        if (e.next_state == next_state && e.reward == reward) {
            e.prob += prob;
            return;
        }
    }
    row.push_back({next_state, reward, prob});
}

void TabularMdp::set_terminal(int s) {
    if (built_) throw std::logic_error("TabularMdp: frozen");
    terminal_[s] = true;
    terminal_set_.insert(s);
}

void TabularMdp::build() {
    r_min_ = std::numeric_limits<double>::infinity();
    r_max_ = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < num_states_; ++s) {
        for (int a = 0; a < num_actions_; ++a) {
            auto& row = kernel_[s * num_actions_ + a];
            if (terminal_[s]) {
                if (!row.empty())
                    throw std::invalid_argument("TabularMdp: terminal state has outgoing entries");
                continue;
            }
            double total = 0.0;
            for (const auto& e : row) {
                total += e.prob;
                r_min_ = std::min(r_min_, e.reward);
                r_max_ = std::max(r_max_, e.reward);
            }
            if (std::abs(total - 1.0) > kProbTol)
                throw std::invalid_argument("TabularMdp: kernel row does not sum to 1");
            std::sort(row.begin(), row.end(), [](const KernelEntry& x, const KernelEntry& y) {
                return x.next_state != y.next_state ? x.next_state < y.next_state
                                                   : x.reward < y.reward;
            });
        }
    }
    if (!std::isfinite(r_min_)) {
        r_min_ = 0.0;
        r_max_ = 0.0;
    }
    built_ = true;
}

void TabularMdp::check_nonterminal(int s, int a) const {
    if (s < 0 || s >= num_states_ || a < 0 || a >= num_actions_)
        throw std::out_of_range("TabularMdp: state/action out of range");
    if (terminal_[s]) throw std::invalid_argument("TabularMdp: terminal state");
}

double TabularMdp::expected_reward(int s, int a) const {
    check_nonterminal(s, a);
    double m = 0.0;
    for (const auto& e : entries(s, a)) m += e.prob * e.reward;
    return m;
}

double TabularMdp::reward_variance(int s, int a) const {
    check_nonterminal(s, a);
    double m = 0.0, m2 = 0.0;
    for (const auto& e : entries(s, a)) {
        m += e.prob * e.reward;
        m2 += e.prob * e.reward * e.reward;
    }
    return std::max(0.0, m2 - m * m);
}

std::pair<std::vector<int>, double> TabularMdp::min_reward_support(int s, int a) const {
    check_nonterminal(s, a);
    double rmin = std::numeric_limits<double>::infinity();
    for (const auto& e : entries(s, a)) rmin = std::min(rmin, e.reward);
    std::vector<int> support;
    for (const auto& e : entries(s, a))
        if (e.reward == rmin) support.push_back(e.next_state);
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    return {support, rmin};
}

std::pair<int, double> TabularMdp::sample_step(Rng& rng, int s, int a) const {
    check_nonterminal(s, a);
    const auto& row = entries(s, a);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    double acc = 0.0;
    for (const auto& e : row) {
        acc += e.prob;
        if (u < acc) return {e.next_state, e.reward};
    }
    return {row.back().next_state, row.back().reward};
}

std::vector<int> TabularMdp::nonterminal_states() const {
    std::vector<int> out;
    for (int s = 0; s < num_states_; ++s)
        if (!terminal_[s]) out.push_back(s);
    return out;
}

// ---------------------------------------------------------------------------
// Grid environments

namespace {

constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

int move_target(const GridWorldSpec& g, int s, int a) {
    int r = g.row_of(s) + kDr[a];
    int c = g.col_of(s) + kDc[a];
    if (r < 0 || r >= g.rows || c < 0 || c >= g.cols) return s;  // bump the wall
    return g.cell(r, c);
}

void validate_spec(const GridWorldSpec& g) {
    auto inside = [&](int s) { return s >= 0 && s < g.rows * g.cols; };
    for (int s : g.goal_cells)
        if (!inside(s)) throw std::invalid_argument("GridWorldSpec: goal outside grid");
    for (int s : g.cliff_cells) {
        if (!inside(s)) throw std::invalid_argument("GridWorldSpec: cliff outside grid");
        if (g.goal_cells.count(s))
            throw std::invalid_argument("GridWorldSpec: cliff overlaps goal");
    }
    for (auto [s, a] : g.risky_pairs) {
        if (!inside(s) || a < 0 || a >= 4)
            throw std::invalid_argument("GridWorldSpec: risky pair outside grid");
        if (g.goal_cells.count(s))
            throw std::invalid_argument("GridWorldSpec: risky pair on a goal cell");
    }
}

void check_goal_reachable(const GridWorldSpec& g, const TabularMdp& mdp) {
    // reverse BFS from goal over positive-probability transitions
    std::vector<bool> reach(mdp.num_states(), false);
    std::deque<int> queue;
    for (int s : g.goal_cells) {
        reach[s] = true;
        queue.push_back(s);
    }
    std::vector<std::vector<int>> pred(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s) {
        if (mdp.is_terminal(s)) continue;
        for (int a = 0; a < mdp.num_actions(); ++a)
            for (const auto& e : mdp.entries(s, a)) pred[e.next_state].push_back(s);
    }
    while (!queue.empty()) {
        int s = queue.front();
        queue.pop_front();
        for (int p : pred[s])
            if (!reach[p]) {
                reach[p] = true;
                queue.push_back(p);
            }
    }
    for (int s = 0; s < mdp.num_states(); ++s)
        if (!mdp.is_terminal(s) && !reach[s])
            throw std::invalid_argument("GridWorldSpec: goal unreachable from some start cell");
}

}  // namespace

TabularMdp build_grid_mdp(const GridWorldSpec& g, double gamma) {
    validate_spec(g);
    TabularMdp mdp(g.rows * g.cols, 4, gamma);
    std::set<std::pair<int, int>> risky(g.risky_pairs.begin(), g.risky_pairs.end());
    auto enter_reward = [&](int ns) {
        if (g.goal_cells.count(ns)) return g.goal_reward;
        if (g.cliff_cells.count(ns)) return g.cliff_reward;
        return g.step_reward;
    };
    for (int s = 0; s < g.rows * g.cols; ++s) {
        if (g.goal_cells.count(s) || g.cliff_cells.count(s)) {
            mdp.set_terminal(s);
            continue;
        }
        for (int a = 0; a < 4; ++a) {
            int intended = move_target(g, s, a);
            if (risky.count({s, a})) {
                // deterministic move, two-point reward
                mdp.add_entry(s, a, intended, g.risky_low_reward, g.risky_low_prob);
                mdp.add_entry(s, a, intended, g.risky_high_reward, 1.0 - g.risky_low_prob);
                continue;
            }
            if (g.slip_prob == 0.0 || g.goal_cells.count(intended)) {
                mdp.add_entry(s, a, intended, enter_reward(intended), 1.0);
                continue;
            }
            mdp.add_entry(s, a, intended, enter_reward(intended), 1.0 - g.slip_prob);
            int ndirs = g.slip_excludes_intended ? 3 : 4;
            for (int d = 0; d < 4; ++d) {
                if (g.slip_excludes_intended && d == a) continue;
                int ns = move_target(g, s, d);
                mdp.add_entry(s, a, ns, enter_reward(ns), g.slip_prob / ndirs);
            }
        }
    }
    mdp.build();
    check_goal_reachable(g, mdp);
    return mdp;
}

std::pair<TabularMdp, GridWorldSpec> build_env1(double gamma,
                                                const std::optional<GridWorldSpec>& overrides) {
    GridWorldSpec g;
    if (overrides) {
        g = *overrides;
    } else {
        g.rows = 4;
        g.cols = 5;
        g.goal_cells = {g.cell(0, 4)};
        g.slip_prob = 0.0;
        g.goal_reward = 150.0;
        g.risky_low_reward = -100.0;
        g.risky_high_reward = 100.0;
        g.risky_low_prob = 0.4;
        // risky corridor: 'right' along the top row toward the goal column
        g.risky_pairs = {{g.cell(0, 0), kActionRight},
                         {g.cell(0, 1), kActionRight},
                         {g.cell(0, 2), kActionRight}};
        g.far_start = g.cell(0, 0);
    }
    return {build_grid_mdp(g, gamma), g};
}

std::pair<TabularMdp, GridWorldSpec> build_env2(double gamma,
                                                const std::optional<GridWorldSpec>& overrides) {
    GridWorldSpec g;
    if (overrides) {
        g = *overrides;
    } else {
        g.rows = 4;
        g.cols = 6;
        g.goal_cells = {g.cell(3, 5)};
        for (int c = 1; c <= 4; ++c) g.cliff_cells.insert(g.cell(3, c));
        g.slip_prob = 0.1;
        g.goal_reward = 10.0;
        g.cliff_reward = -12.0;
        g.far_start = g.cell(3, 0);
    }
    return {build_grid_mdp(g, gamma), g};
}

// ---------------------------------------------------------------------------
// JSON (canonical field order for reproducible hashing)

std::string GridWorldSpec::to_json() const {
    nlohmann::ordered_json j;
    j["rows"] = rows;
    j["cols"] = cols;
    j["goal_cells"] = goal_cells;
    j["cliff_cells"] = cliff_cells;
    nlohmann::ordered_json rp = nlohmann::ordered_json::array();
    for (auto [s, a] : risky_pairs) rp.push_back({s, a});
    j["risky_pairs"] = rp;
    j["slip_prob"] = slip_prob;
    j["slip_excludes_intended"] = slip_excludes_intended;
    j["step_reward"] = step_reward;
    j["goal_reward"] = goal_reward;
    j["cliff_reward"] = cliff_reward;
    j["risky_low_reward"] = risky_low_reward;
    j["risky_high_reward"] = risky_high_reward;
    j["risky_low_prob"] = risky_low_prob;
    j["far_start"] = far_start;
    return j.dump(2);
}

GridWorldSpec GridWorldSpec::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    GridWorldSpec g;
    g.rows = j.at("rows");
    g.cols = j.at("cols");
    for (int s : j.at("goal_cells")) g.goal_cells.insert(s);
    for (int s : j.at("cliff_cells")) g.cliff_cells.insert(s);
    for (const auto& p : j.at("risky_pairs")) g.risky_pairs.emplace_back(p.at(0), p.at(1));
    g.slip_prob = j.at("slip_prob");
    g.slip_excludes_intended = j.value("slip_excludes_intended", false);
    g.step_reward = j.at("step_reward");
    g.goal_reward = j.at("goal_reward");
    g.cliff_reward = j.at("cliff_reward");
    g.risky_low_reward = j.at("risky_low_reward");
    g.risky_high_reward = j.at("risky_high_reward");
    g.risky_low_prob = j.at("risky_low_prob");
    g.far_start = j.value("far_start", -1);
    return g;
}

}  // namespace replay_shaper
