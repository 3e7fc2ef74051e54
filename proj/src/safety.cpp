#include "replay_shaper/safety.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace replay_shaper {

Assumption1Report check_assumption1(const WeightFunction& w, const TabularMdp& mdp) {
    Assumption1Report rep;
    rep.variance_monotone = true;
    rep.reward_monotone = true;

    struct PairInfo {
        int s, a;
        double var, mass;
    };
    std::vector<PairInfo> pairs;
    for (int s : mdp.nonterminal_states())
        for (int a = 0; a < mdp.num_actions(); ++a)
            pairs.push_back({s, a, mdp.reward_variance(s, a), w.pair_mass(s, a)});

    // bullet 1: strictly more mass on strictly higher-variance pairs
    std::sort(pairs.begin(), pairs.end(),
              [](const PairInfo& x, const PairInfo& y) { return x.var < y.var; });
    for (size_t i = 0; i + 1 < pairs.size(); ++i) {
        const auto& lo = pairs[i];
        const auto& hi = pairs[i + 1];
        if (hi.var > lo.var && !(hi.mass > lo.mass)) {
            rep.variance_monotone = false;
            if (rep.violations.size() < 20) {
                std::ostringstream msg;
                msg << "bullet1: var(" << hi.s << "," << hi.a << ")=" << hi.var << " > var("
                    << lo.s << "," << lo.a << ")=" << lo.var << " but mass " << hi.mass
                    << " <= " << lo.mass;
                rep.violations.push_back(msg.str());
            }
        }
    }

    // bullet 2: within a pair, aggregate mass strictly decreasing in reward
    for (const auto& p : pairs) {
        if (p.mass <= 0.0) continue;
        std::map<double, double> by_reward;
        for (const auto& [key, m] : w.table()) {
            if (std::get<0>(key) != p.s || std::get<1>(key) != p.a) continue;
            by_reward[std::get<3>(key)] += m;
        }
        double prev = -1.0;
        bool first = true;
        for (const auto& [r, m] : by_reward) {  // ascending reward
            if (!first && !(m < prev)) {
                rep.reward_monotone = false;
                if (rep.violations.size() < 20) {
                    std::ostringstream msg;
                    msg << "bullet2: pair (" << p.s << "," << p.a << ") mass at r=" << r
                        << " is " << m << ", not below " << prev;
                    rep.violations.push_back(msg.str());
                }
            }
            prev = m;
            first = false;
        }
    }

    // bullet 3: concentration diagnostic at the max-variance pair
    const auto& top = *std::max_element(
        pairs.begin(), pairs.end(),
        [](const PairInfo& x, const PairInfo& y) { return x.var < y.var; });
    auto [support, r_min] = mdp.min_reward_support(top.s, top.a);
    double target = 1.0 / static_cast<double>(support.size());
    double gap = 0.0;
    for (int ns : support)
        gap = std::max(gap, std::abs(w.mass({top.s, top.a, ns, r_min}) - target));
    rep.concentration_gap = gap;
    return rep;
}

namespace {

double max_q(const TabularMdp& mdp, const QTable& q, int s) {
    return mdp.is_terminal(s) ? 0.0 : q.max_value(s);
}

/// Marginal next-state probabilities p(s'|s,a) from the joint kernel.
std::map<int, double> marginal_p(const TabularMdp& mdp, int s, int a) {
    std::map<int, double> p;
    for (const auto& e : mdp.entries(s, a)) p[e.next_state] += e.prob;
    return p;
}

}  // namespace

SwitchReport theorem2_report(const TabularMdp& mdp, double v, const WeightFunction& w_inf,
                             int s_i, int a_i) {
    WeightFunction zero;
    auto [q0, it0] = fixed_point(effective_model(mdp, zero, 0.0), 1e-10);
    for (int b = 0; b < mdp.num_actions(); ++b)
        if (b != a_i && !(q0(s_i, b) < q0(s_i, a_i)))
            throw std::invalid_argument("theorem2_report: a_i is not the unique argmax");

    auto [q_star, it1] = fixed_point(effective_model(mdp, w_inf, v), 1e-10);

    double reward_gap_term;
    double operator_shift_term = 0.0;
    double replay_successor_term;
    {
        auto [support, r_min] = mdp.min_reward_support(s_i, a_i);
        reward_gap_term = v * (mdp.expected_reward(s_i, a_i) - r_min);
        double p_max_star = 0.0;
        for (const auto& [ns, p] : marginal_p(mdp, s_i, a_i)) {
            operator_shift_term += p * (max_q(mdp, q0, ns) - max_q(mdp, q_star, ns));
            p_max_star += p * max_q(mdp, q_star, ns);
        }
        operator_shift_term *= mdp.gamma();
        double support_avg = 0.0;
        for (int ns : support)
            support_avg += max_q(mdp, q_star, ns) / static_cast<double>(support.size());
        replay_successor_term = v * mdp.gamma() * (p_max_star - support_avg);
    }

    SwitchReport rep;
    rep.state = s_i;
    rep.baseline_action = a_i;
    rep.rhs_bound = reward_gap_term + operator_shift_term + replay_successor_term;
    rep.q0_baseline = q0(s_i, a_i);
    rep.qstar_baseline = q_star(s_i, a_i);
    for (int b = 0; b < mdp.num_actions(); ++b) {
        if (b == a_i) continue;
        SwitchCandidate c;
        c.action = b;
        c.lhs_gap = q0(s_i, a_i) - q0(s_i, b);
        c.predicted = c.lhs_gap < rep.rhs_bound;
        rep.predicted_switch = rep.predicted_switch || c.predicted;
        rep.candidates.push_back(c);
    }
    rep.actual_switch = q_star.argmax(s_i) != a_i;
    return rep;
}

double limit_q_closed_form(const TabularMdp& mdp, double v, int s_i, int a_i,
                           const QTable& q_star) {
    auto [support, r_min] = mdp.min_reward_support(s_i, a_i);
    double env_part = mdp.expected_reward(s_i, a_i);
    for (const auto& [ns, p] : marginal_p(mdp, s_i, a_i))
        env_part += mdp.gamma() * p * max_q(mdp, q_star, ns);
    double replay_part = r_min;
    for (int ns : support)
        replay_part += mdp.gamma() * max_q(mdp, q_star, ns) / static_cast<double>(support.size());
    return (1.0 - v) * env_part + v * replay_part;
}

RiskMetrics policy_risk_profile(const TabularMdp& mdp, const std::vector<int>& policy,
                                const std::set<int>& catastrophic_states,
                                double variance_threshold, long long n_episodes,
                                std::uint64_t seed, int max_steps) {
    const int cap = max_steps > 0 ? max_steps : 10 * mdp.num_states();
    const auto nonterm = mdp.nonterminal_states();
    std::vector<bool> risky(static_cast<size_t>(mdp.num_states()) * mdp.num_actions(), false);
    for (int s : nonterm)
        for (int a = 0; a < mdp.num_actions(); ++a)
            risky[s * mdp.num_actions() + a] = mdp.reward_variance(s, a) > variance_threshold;

    double sum = 0.0, sum_sq = 0.0;
    long long risky_eps = 0, cata_eps = 0;
#pragma omp parallel for schedule(static) reduction(+ : sum, sum_sq, risky_eps, cata_eps)
    for (long long ep = 0; ep < n_episodes; ++ep) {
        Rng rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(ep + 1));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        int s = nonterm[std::min(nonterm.size() - 1,
                                 static_cast<size_t>(unif(rng) * nonterm.size()))];
        double ret = 0.0, discount = 1.0;
        bool hit_risky = false, hit_cata = false;
        for (int step = 0; step < cap; ++step) {
            int a = policy[s];
            if (risky[s * mdp.num_actions() + a]) hit_risky = true;
            auto [ns, r] = mdp.sample_step(rng, s, a);
            ret += discount * r;
            discount *= mdp.gamma();
            s = ns;
            if (mdp.is_terminal(s)) {
                hit_cata = catastrophic_states.count(s) > 0;
                break;
            }
        }
        sum += ret;
        sum_sq += ret * ret;
        if (hit_risky) ++risky_eps;
        if (hit_cata) ++cata_eps;
    }

    RiskMetrics m;
    m.episodes = n_episodes;
    m.mean_return = sum / static_cast<double>(n_episodes);
    double var = std::max(0.0, sum_sq / static_cast<double>(n_episodes) -
                                   m.mean_return * m.mean_return);
    m.return_std = std::sqrt(var);
    m.risky_traversal_prob = static_cast<double>(risky_eps) / static_cast<double>(n_episodes);
    m.catastrophe_prob = static_cast<double>(cata_eps) / static_cast<double>(n_episodes);
    return m;
}

std::vector<std::pair<int, int>> greedy_path(const TabularMdp& mdp,
                                             const std::vector<int>& policy, int start,
                                             int max_steps) {
    std::vector<std::pair<int, int>> path;
    std::set<std::pair<int, int>> seen;
    int s = start;
    for (int step = 0; step < max_steps && !mdp.is_terminal(s); ++step) {
        int a = policy[s];
        if (!seen.insert({s, a}).second) break;
        path.emplace_back(s, a);
        const KernelEntry* best = nullptr;
        for (const auto& e : mdp.entries(s, a))
            if (best == nullptr || e.prob > best->prob) best = &e;
        s = best->next_state;
    }
    return path;
}

std::string Assumption1Report::to_json() const {
    nlohmann::ordered_json j;
    j["variance_monotone"] = variance_monotone;
    j["reward_monotone"] = reward_monotone;
    j["concentration_gap"] = concentration_gap;
    j["violations"] = violations;
    return j.dump(2);
}

std::string SwitchReport::to_json() const {
    nlohmann::ordered_json j;
    j["state"] = state;
    j["baseline_action"] = baseline_action;
    j["rhs_bound"] = rhs_bound;
    j["q0_baseline"] = q0_baseline;
    j["qstar_baseline"] = qstar_baseline;
    j["predicted_switch"] = predicted_switch;
    j["actual_switch"] = actual_switch;
    nlohmann::ordered_json cands = nlohmann::ordered_json::array();
    for (const auto& c : candidates)
        cands.push_back({{"action", c.action}, {"lhs_gap", c.lhs_gap}, {"predicted", c.predicted}});
    j["candidates"] = cands;
    return j.dump(2);
}

std::string RiskMetrics::to_json() const {
    nlohmann::ordered_json j;
    j["episodes"] = episodes;
    j["mean_return"] = mean_return;
    j["return_std"] = return_std;
    j["risky_traversal_prob"] = risky_traversal_prob;
    j["catastrophe_prob"] = catastrophe_prob;
    return j.dump(2);
}

}  // namespace replay_shaper
