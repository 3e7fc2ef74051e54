#include "replay_shaper/effective_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace replay_shaper {

namespace {

/// Tuples of w restricted to one (s,a), in table order.
std::vector<std::pair<TransitionKey, double>> pair_tuples(const WeightFunction& w, int s,
                                                          int a) {
    std::vector<std::pair<TransitionKey, double>> out;
    auto it = w.table().lower_bound({s, a, std::numeric_limits<int>::min(),
                                     -std::numeric_limits<double>::infinity()});
    for (; it != w.table().end(); ++it) {
        if (std::get<0>(it->first) != s || std::get<1>(it->first) != a) break;
        out.push_back(*it);
    }
    return out;
}

double denominator(const WeightFunction& w, double v, int s, int a) {
    return (1.0 - v) + v * w.pair_mass(s, a);
}

}  // namespace

std::pair<double, double> phi_pair(const TabularMdp& mdp, const WeightFunction& w, double v,
                                   int s, int a, int next_state, double reward) {
    if (mdp.is_terminal(s)) throw std::invalid_argument("phi_pair: terminal state");
    double d = denominator(w, v, s, a);
    if (d <= 0.0) throw std::runtime_error("phi_pair: zero denominator");
    double q = 0.0;
    for (const auto& e : mdp.entries(s, a))
        if (e.next_state == next_state && e.reward == reward) q = e.prob;
    return {q / d, w.mass({s, a, next_state, reward}) / d};
}

EffectiveModel effective_model(const TabularMdp& mdp, const WeightFunction& w, double v) {
    if (v < 0.0 || v >= 1.0) throw std::invalid_argument("effective_model: v must be in [0,1)");
    EffectiveModel m;
    m.num_states = mdp.num_states();
    m.num_actions = mdp.num_actions();
    m.v = v;
    m.gamma = mdp.gamma();
    m.terminal.resize(mdp.num_states());
    m.rows.resize(static_cast<size_t>(m.num_states) * m.num_actions);
    for (int s = 0; s < m.num_states; ++s) m.terminal[s] = mdp.is_terminal(s);

    for (int s : mdp.nonterminal_states()) {
        for (int a = 0; a < m.num_actions; ++a) {
            double d = denominator(w, v, s, a);
            if (d <= 0.0) throw std::runtime_error("effective_model: zero denominator");
            // accumulate (1-v)q + v*w per next state, plus the reward-weighted sum
            std::map<int, std::pair<double, double>> acc;  // s' -> (prob mass, r-weighted mass)
            for (const auto& e : mdp.entries(s, a)) {
                double mass = (1.0 - v) * e.prob;
                auto& slot = acc[e.next_state];
                slot.first += mass;
                slot.second += mass * e.reward;
            }
            for (const auto& [key, mass] : pair_tuples(w, s, a)) {
                auto& slot = acc[std::get<2>(key)];
                slot.first += v * mass;
                slot.second += v * mass * std::get<3>(key);
            }
            auto& row = m.rows[s * m.num_actions + a];
            for (const auto& [ns, slot] : acc) {
                double p = slot.first / d;
                if (p <= 0.0) continue;
                row.push_back({ns, p, slot.second / slot.first});
            }
        }
    }
    return m;
}

QTable apply_h_serial(const EffectiveModel& model, const QTable& q) {
    QTable out(model.num_states, model.num_actions);
    for (int s = 0; s < model.num_states; ++s) {
        if (model.terminal[s]) continue;
        for (int a = 0; a < model.num_actions; ++a) {
            double sum = 0.0;
            for (const auto& e : model.row(s, a)) {
                double cont = model.terminal[e.next_state] ? 0.0 : q.max_value(e.next_state);
                sum += e.p * (e.r + model.gamma * cont);
            }
            out(s, a) = sum;
        }
    }
    return out;
}

QTable apply_h(const EffectiveModel& model, const QTable& q) {
    QTable out(model.num_states, model.num_actions);
    const int n_rows = model.num_states * model.num_actions;
#pragma omp parallel for schedule(static)
    for (int idx = 0; idx < n_rows; ++idx) {
        int s = idx / model.num_actions;
        if (model.terminal[s]) continue;
        double sum = 0.0;
        for (const auto& e : model.rows[idx]) {
            double cont = model.terminal[e.next_state] ? 0.0 : q.max_value(e.next_state);
            sum += e.p * (e.r + model.gamma * cont);
        }
        out.data()[idx] = sum;
    }
    return out;
}

std::pair<QTable, int> fixed_point(const EffectiveModel& model, double tol) {
    if (tol <= 0.0) throw std::invalid_argument("fixed_point: tol must be positive");
    double threshold = model.gamma > 0.0 ? tol * (1.0 - model.gamma) / model.gamma : tol;
    QTable q(model.num_states, model.num_actions);
    constexpr int kMaxIters = 1000000;
    for (int k = 1; k <= kMaxIters; ++k) {
        QTable next = apply_h(model, q);
        double delta = max_norm_diff(next, q);
        q = std::move(next);
        if (delta < threshold) return {std::move(q), k};
    }
    throw std::runtime_error("fixed_point: iteration cap exceeded");
}

namespace {
QTable random_q(int num_states, int num_actions, double scale, Rng& rng) {
    std::uniform_real_distribution<double> unif(-scale, scale);
    QTable q(num_states, num_actions);
    for (auto& x : q.data()) x = unif(rng);
    return q;
}
}  // namespace

double contraction_check(const EffectiveModel& model, Rng& rng, int trials) {
    if (trials < 1) throw std::invalid_argument("contraction_check: trials must be >= 1");
    double scale = 100.0 / (1.0 - model.gamma);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        QTable q1 = random_q(model.num_states, model.num_actions, scale, rng);
        QTable q2 = random_q(model.num_states, model.num_actions, scale, rng);
        double dq = max_norm_diff(q1, q2);
        if (dq == 0.0) continue;
        double dh = max_norm_diff(apply_h(model, q1), apply_h(model, q2));
        worst = std::max(worst, dh / dq);
    }
    return worst;
}

NoiseCheck noise_term_check(const TabularMdp& mdp, const WeightFunction& w, double v,
                            const QTable& q, int s, int a, Rng& rng, long long n_samples) {
    if (n_samples < 1000) throw std::invalid_argument("noise_term_check: need >= 1000 samples");
    if (mdp.is_terminal(s)) throw std::invalid_argument("noise_term_check: terminal state");

    double mass = w.pair_mass(s, a);
    double d = (1.0 - v) + v * mass;
    if (d <= 0.0) throw std::runtime_error("noise_term_check: zero denominator");
    double replay_prob = v * mass / d;

    auto tuples = pair_tuples(w, s, a);
    auto continuation = [&](int ns) {
        return mdp.is_terminal(ns) ? 0.0 : q.max_value(ns);
    };

    // exact (HQ)(s,a) under the same mixture law
    double hq = 0.0;
    for (const auto& e : mdp.entries(s, a))
        hq += (1.0 - v) * e.prob / d * (e.reward + mdp.gamma() * continuation(e.next_state));
    for (const auto& [key, m] : tuples)
        hq += v * m / d * (std::get<3>(key) + mdp.gamma() * continuation(std::get<2>(key)));

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double sum = 0.0, sum_sq = 0.0;
    for (long long i = 0; i < n_samples; ++i) {
        int ns;
        double r;
        if (unif(rng) < replay_prob) {
            double u = unif(rng) * mass;
            double acc = 0.0;
            size_t j = 0;
            for (; j + 1 < tuples.size(); ++j) {
                acc += tuples[j].second;
                if (u < acc) break;
            }
            ns = std::get<2>(tuples[j].first);
            r = std::get<3>(tuples[j].first);
        } else {
            std::tie(ns, r) = mdp.sample_step(rng, s, a);
        }
        double e = r + mdp.gamma() * continuation(ns) - hq;
        sum += e;
        sum_sq += e * e;
    }

    NoiseCheck out;
    out.n_samples = n_samples;
    out.mean = sum / static_cast<double>(n_samples);
    out.mean_sq = sum_sq / static_cast<double>(n_samples);
    double var = std::max(0.0, out.mean_sq - out.mean * out.mean);
    out.std_error = std::sqrt(var / static_cast<double>(n_samples));
    double r_abs = std::max(std::abs(mdp.r_min()), std::abs(mdp.r_max()));
    double k = 4.0 * r_abs * r_abs + 2.0 * mdp.gamma() * mdp.gamma();
    double qn = q.max_norm();
    out.second_moment_bound = k * (1.0 + qn * qn);
    return out;
}

double mapping_distance(const EffectiveModel& m1, const EffectiveModel& m2, Rng& rng,
                        int trials) {
    if (m1.num_states != m2.num_states || m1.num_actions != m2.num_actions)
        throw std::invalid_argument("mapping_distance: shape mismatch");
    double scale = 100.0 / (1.0 - std::max(m1.gamma, m2.gamma));
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        QTable q = random_q(m1.num_states, m1.num_actions, scale, rng);
        worst = std::max(worst, max_norm_diff(apply_h(m1, q), apply_h(m2, q)));
    }
    return worst;
}

std::string EffectiveModel::to_json() const {
    nlohmann::ordered_json j;
    j["num_states"] = num_states;
    j["num_actions"] = num_actions;
    j["v"] = v;
    j["gamma"] = gamma;
    nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            if (terminal[s]) continue;
            for (const auto& e : row(s, a)) {
                rows_json.push_back({{"s", s},
                                     {"a", a},
                                     {"next", e.next_state},
                                     {"p_tilde", e.p},
                                     {"r_tilde", e.r}});
            }
        }
    }
    j["rows"] = rows_json;
    return j.dump(2);
}

}  // namespace replay_shaper
