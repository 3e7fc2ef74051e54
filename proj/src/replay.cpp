#include "replay_shaper/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace replay_shaper {

namespace {
constexpr double kMassTol = 1e-12;
}

std::vector<double> softmin_weights(const std::vector<double>& rewards, double beta) {
    if (rewards.empty()) return {};
    double m = -beta * rewards[0];
    for (double r : rewards) m = std::max(m, -beta * r);
    std::vector<double> w(rewards.size());
    double z = 0.0;
    for (size_t i = 0; i < rewards.size(); ++i) {
        w[i] = std::exp(-beta * rewards[i] - m);
        z += w[i];
    }
    for (auto& x : w) x /= z;
    return w;
}

// ---------------------------------------------------------------------------
// WeightFunction

WeightFunction::WeightFunction(std::map<TransitionKey, double> table, Provenance provenance)
    : table_(std::move(table)), provenance_(provenance) {
    for (auto it = table_.begin(); it != table_.end();) {
        if (it->second < 0.0) throw std::invalid_argument("WeightFunction: negative mass");
        if (it->second == 0.0) {
            it = table_.erase(it);
        } else {
            total_mass_ += it->second;
            ++it;
        }
    }
    if (!table_.empty() && std::abs(total_mass_ - 1.0) > kMassTol)
        throw std::invalid_argument("WeightFunction: total mass must be 1");
}

double WeightFunction::mass(const TransitionKey& key) const {
    auto it = table_.find(key);
    return it == table_.end() ? 0.0 : it->second;
}

double WeightFunction::pair_mass(int s, int a) const {
    double m = 0.0;
    auto it = table_.lower_bound({s, a, std::numeric_limits<int>::min(),
                                  -std::numeric_limits<double>::infinity()});
    for (; it != table_.end(); ++it) {
        if (std::get<0>(it->first) != s || std::get<1>(it->first) != a) break;
        m += it->second;
    }
    return m;
}

TransitionKey WeightFunction::sample(Rng& rng) const {
    if (table_.empty() || total_mass_ <= 0.0)
        throw std::runtime_error("WeightFunction: sampling from zero mass");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng) * total_mass_;
    double acc = 0.0;
    for (const auto& [key, m] : table_) {
        acc += m;
        if (u < acc) return key;
    }
    return table_.rbegin()->first;
}

TransitionKey sample_replay(const WeightFunction& weights, Rng& rng) {
    return weights.sample(rng);
}

double weight_distance(const WeightFunction& a, const WeightFunction& b) {
    double d = 0.0;
    for (const auto& [key, m] : a.table()) d = std::max(d, std::abs(m - b.mass(key)));
    for (const auto& [key, m] : b.table()) d = std::max(d, std::abs(m - a.mass(key)));
    return d;
}

std::string WeightFunction::to_json() const {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& [key, m] : table_) {
        auto [s, a, ns, r] = key;
        rows.push_back({{"s", s}, {"a", a}, {"next", ns}, {"r", r}, {"mass", m}});
    }
    nlohmann::ordered_json j;
    j["tuples"] = rows;
    return j.dump(2);
}

WeightFunction WeightFunction::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    std::map<TransitionKey, double> table;
    for (const auto& row : j.at("tuples")) {
        table[{row.at("s"), row.at("a"), row.at("next"), row.at("r")}] = row.at("mass");
    }
    return WeightFunction(std::move(table));
}

// ---------------------------------------------------------------------------
// BufferStats

BufferStats::BufferStats(int num_states, int num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      pairs_(static_cast<size_t>(num_states) * num_actions) {}

void BufferStats::record_transition(int s, int a, double r, int next_state) {
    auto& p = pair(s, a);
    variance_sum_ -= empirical_variance(s, a);
    if (p.n == 0) touched_.emplace_back(s, a);
    p.n += 1;
    p.reward_sum += r;
    p.reward_sq_sum += r * r;
    p.by_reward[r][next_state] += 1;
    total_ += 1;
    variance_sum_ += empirical_variance(s, a);
}

double BufferStats::empirical_variance(int s, int a) const {
    const auto& p = pair(s, a);
    if (p.n <= 1) return 0.0;
    double mean = p.reward_sum / static_cast<double>(p.n);
    return std::max(0.0, p.reward_sq_sum / static_cast<double>(p.n) - mean * mean);
}

double BufferStats::total_variance() const { return std::max(0.0, variance_sum_); }

std::vector<double> BufferStats::unique_rewards(int s, int a) const {
    std::vector<double> out;
    for (const auto& [r, _] : pair(s, a).by_reward) out.push_back(r);
    return out;
}

std::vector<int> BufferStats::next_states(int s, int a, double r) const {
    std::vector<int> out;
    const auto& br = pair(s, a).by_reward;
    auto it = br.find(r);
    if (it != br.end())
        for (const auto& [ns, _] : it->second) out.push_back(ns);
    return out;
}

long long BufferStats::tuple_count(int s, int a, int next_state, double r) const {
    const auto& br = pair(s, a).by_reward;
    auto it = br.find(r);
    if (it == br.end()) return 0;
    auto jt = it->second.find(next_state);
    return jt == it->second.end() ? 0 : jt->second;
}

TransitionKey BufferStats::sample(Rng& rng, const SchemeConfig& config) const {
    if (total_ == 0) throw std::runtime_error("BufferStats: empty buffer");
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto sample_uniform_tuples = [&]() -> TransitionKey {
        // uniform over distinct stored tuples
        long long distinct = 0;
        for (auto [s, a] : touched_)
            for (const auto& [r, ls] : pair(s, a).by_reward) distinct += ls.size();
        long long k = std::min<long long>(distinct - 1,
                                          static_cast<long long>(unif(rng) * distinct));
        for (auto [s, a] : touched_)
            for (const auto& [r, ls] : pair(s, a).by_reward)
                for (const auto& [ns, _] : ls) {
                    if (k == 0) return {s, a, ns, r};
                    --k;
                }
        throw std::logic_error("BufferStats: tuple enumeration out of sync");
    };

    auto sample_by_counts = [&]() -> TransitionKey {
        double u = unif(rng) * static_cast<double>(total_);
        double acc = 0.0;
        for (auto [s, a] : touched_)
            for (const auto& [r, ls] : pair(s, a).by_reward)
                for (const auto& [ns, c] : ls) {
                    acc += static_cast<double>(c);
                    if (u < acc) return {s, a, ns, r};
                }
        throw std::logic_error("BufferStats: count enumeration out of sync");
    };

    switch (config.kind) {
        case SchemeKind::none:
            throw std::runtime_error("BufferStats: scheme 'none' has zero mass");
        case SchemeKind::uniform:
            return sample_by_counts();
        case SchemeKind::frozen:
            throw std::logic_error("BufferStats: frozen scheme samples from its table");
        case SchemeKind::variance_prioritized:
            break;
    }

    double tv = total_variance();
    if (tv <= 0.0) {
        if (!config.zero_variance_fallback)
            throw std::runtime_error("BufferStats: zero total variance and fallback disabled");
        return sample_uniform_tuples();
    }
    // stage 1: pair proportional to empirical variance
    double u = unif(rng) * tv;
    double acc = 0.0;
    int ps = -1, pa = -1;
    for (auto [s, a] : touched_) {
        acc += empirical_variance(s, a);
        if (u < acc) {
            ps = s;
            pa = a;
            break;
        }
    }
    if (ps < 0) {  // numerical edge: fall to the last positive-variance pair
        for (auto it = touched_.rbegin(); it != touched_.rend(); ++it)
            if (empirical_variance(it->first, it->second) > 0.0) {
                ps = it->first;
                pa = it->second;
                break;
            }
    }
    // stage 2: reward by softmin over M_t
    auto rewards = unique_rewards(ps, pa);
    auto sw = softmin_weights(rewards, config.beta);
    double ur = unif(rng);
    double racc = 0.0;
    double reward = rewards.back();
    for (size_t i = 0; i < rewards.size(); ++i) {
        racc += sw[i];
        if (ur < racc) {
            reward = rewards[i];
            break;
        }
    }
    // stage 3: next state uniform over L_t
    auto ls = next_states(ps, pa, reward);
    size_t idx = std::min(ls.size() - 1, static_cast<size_t>(unif(rng) * ls.size()));
    return {ps, pa, ls[idx], reward};
}

// ---------------------------------------------------------------------------
// Weight construction

WeightFunction replay_weights(const BufferStats& stats, const SchemeConfig& config) {
    if (stats.total_transitions() == 0)
        throw std::runtime_error("replay_weights: empty buffer");
    std::map<TransitionKey, double> table;

    if (config.kind == SchemeKind::none)
        return WeightFunction({}, WeightFunction::Provenance::empirical);

    if (config.kind == SchemeKind::uniform) {
        double total = static_cast<double>(stats.total_transitions());
        for (auto [s, a] : stats.touched_)
            for (const auto& [r, ls] : stats.pair(s, a).by_reward)
                for (const auto& [ns, c] : ls)
                    table[{s, a, ns, r}] = static_cast<double>(c) / total;
        return WeightFunction(std::move(table), WeightFunction::Provenance::empirical);
    }

    double tv = stats.total_variance();
    if (tv <= 0.0) {
        if (!config.zero_variance_fallback)
            throw std::runtime_error("replay_weights: zero total variance and fallback disabled");
        long long distinct = 0;
        for (auto [s, a] : stats.touched_)
            for (const auto& [r, ls] : stats.pair(s, a).by_reward) distinct += ls.size();
        for (auto [s, a] : stats.touched_)
            for (const auto& [r, ls] : stats.pair(s, a).by_reward)
                for (const auto& [ns, _] : ls)
                    table[{s, a, ns, r}] = 1.0 / static_cast<double>(distinct);
        return WeightFunction(std::move(table), WeightFunction::Provenance::empirical);
    }

    for (auto [s, a] : stats.touched_) {
        double var = stats.empirical_variance(s, a);
        if (var <= 0.0) continue;
        auto rewards = stats.unique_rewards(s, a);
        auto sw = softmin_weights(rewards, config.beta);
        for (size_t i = 0; i < rewards.size(); ++i) {
            auto ls = stats.next_states(s, a, rewards[i]);
            double w = var / tv * sw[i] / static_cast<double>(ls.size());
            for (int ns : ls) table[{s, a, ns, rewards[i]}] = w;
        }
    }
    return WeightFunction(std::move(table), WeightFunction::Provenance::empirical);
}

WeightFunction limiting_weights(const TabularMdp& mdp, double beta) {
    double tv = 0.0;
    for (int s : mdp.nonterminal_states())
        for (int a = 0; a < mdp.num_actions(); ++a) tv += mdp.reward_variance(s, a);
    std::map<TransitionKey, double> table;
    if (tv <= 0.0) {
        // all rewards deterministic: fall back to uniform over kernel tuples
        long long distinct = 0;
        for (int s : mdp.nonterminal_states())
            for (int a = 0; a < mdp.num_actions(); ++a) distinct += mdp.entries(s, a).size();
        for (int s : mdp.nonterminal_states())
            for (int a = 0; a < mdp.num_actions(); ++a)
                for (const auto& e : mdp.entries(s, a))
                    table[{s, a, e.next_state, e.reward}] = 1.0 / static_cast<double>(distinct);
        return WeightFunction(std::move(table), WeightFunction::Provenance::limiting);
    }
    for (int s : mdp.nonterminal_states()) {
        for (int a = 0; a < mdp.num_actions(); ++a) {
            double var = mdp.reward_variance(s, a);
            if (var <= 0.0) continue;
            std::vector<double> rewards;
            for (const auto& e : mdp.entries(s, a)) rewards.push_back(e.reward);
            std::sort(rewards.begin(), rewards.end());
            rewards.erase(std::unique(rewards.begin(), rewards.end()), rewards.end());
            auto sw = softmin_weights(rewards, beta);
            for (size_t i = 0; i < rewards.size(); ++i) {
                std::vector<int> support;
                for (const auto& e : mdp.entries(s, a))
                    if (e.reward == rewards[i]) support.push_back(e.next_state);
                std::sort(support.begin(), support.end());
                support.erase(std::unique(support.begin(), support.end()), support.end());
                double w = var / tv * sw[i] / static_cast<double>(support.size());
                if (w > 0.0)
                    for (int ns : support) table[{s, a, ns, rewards[i]}] = w;
            }
        }
    }
    return WeightFunction(std::move(table), WeightFunction::Provenance::limiting);
}

}  // namespace replay_shaper
