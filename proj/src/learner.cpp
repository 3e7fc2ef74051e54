#include "replay_shaper/learner.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace replay_shaper {

void q_update(QTable& q, int s, int a, double r, int next_state, bool next_terminal,
              double alpha, double gamma) {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("q_update: alpha out of range");
    double cont = next_terminal ? 0.0 : q.max_value(next_state);
    double target = r + gamma * cont;
    q(s, a) += alpha * (target - q(s, a));
}

double learning_rate(long long visit_count, double alpha_exponent) {
    if (visit_count < 1) throw std::invalid_argument("learning_rate: count must be >= 1");
    return std::pow(1.0 / static_cast<double>(visit_count), alpha_exponent);
}

double glie_epsilon(long long state_visit_count, const GlieSchedule& schedule) {
    double eps = schedule.c / std::pow(1.0 + static_cast<double>(state_visit_count), schedule.p);
    return std::min(1.0, eps);
}

std::vector<int> greedy_policy(const QTable& q) {
    std::vector<int> policy(q.num_states());
    for (int s = 0; s < q.num_states(); ++s) policy[s] = q.argmax(s);
    return policy;
}

std::string RunLog::to_csv() const {
    std::ostringstream out;
    out << "episode,return,steps\n";
    for (size_t i = 0; i < episode_returns.size(); ++i)
        out << i << "," << episode_returns[i] << "," << episode_steps[i] << "\n";
    return out.str();
}

RunResult run_algorithm1(const TabularMdp& mdp, const LearnerConfig& cfg,
                         const SchemeConfig& scheme, const WeightFunction* limit) {
    if (cfg.v < 0.0 || cfg.v >= 1.0)
        throw std::invalid_argument("run_algorithm1: v must be in [0,1)");
    if (cfg.alpha_exponent <= 0.5 || cfg.alpha_exponent > 1.0)
        throw std::invalid_argument("run_algorithm1: alpha_exponent must be in (0.5,1]");
    if (cfg.t0 < 1) throw std::invalid_argument("run_algorithm1: t0 must be >= 1");
    if (cfg.episodes < 1 && cfg.max_total_iterations < 1)
        throw std::invalid_argument("run_algorithm1: need episodes or an iteration cap");
    if (scheme.kind == SchemeKind::frozen && cfg.frozen_weights == nullptr)
        throw std::invalid_argument("run_algorithm1: frozen scheme needs frozen_weights");

    const int n_states = mdp.num_states();
    const int n_actions = mdp.num_actions();
    const int cap = cfg.max_steps_per_episode > 0 ? cfg.max_steps_per_episode : 10 * n_states;

    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    QTable q(n_states, n_actions, cfg.c0);
    for (int s : mdp.terminal_states())
        for (int a = 0; a < n_actions; ++a) q(s, a) = 0.0;

    std::vector<long long> pair_updates(static_cast<size_t>(n_states) * n_actions, 0);
    std::vector<long long> state_visits(n_states, 0);
    BufferStats buffer(n_states, n_actions);
    RunLog log;
    log.non_glie_schedule = cfg.glie.p == 0.0;

    const auto nonterm = mdp.nonterminal_states();
    auto random_start = [&]() {
        return nonterm[std::min(nonterm.size() - 1,
                                static_cast<size_t>(unif(rng) * nonterm.size()))];
    };
    auto update = [&](int s, int a, double r, int ns, long long t) {
        double alpha;
        if (cfg.global_t_alpha) {
            alpha = learning_rate(t, cfg.alpha_exponent);
        } else {
            alpha = learning_rate(++pair_updates[s * n_actions + a], cfg.alpha_exponent);
        }
        q_update(q, s, a, r, ns, mdp.is_terminal(ns), alpha, cfg.gamma);
    };

    size_t next_checkpoint = 0;
    auto maybe_checkpoint = [&](long long t) {
        if (next_checkpoint >= cfg.checkpoint_iterations.size()) return;
        if (t < cfg.checkpoint_iterations[next_checkpoint]) return;
        Checkpoint cp;
        cp.iteration = t;
        cp.q = q;
        if (limit != nullptr && buffer.total_transitions() > 0)
            cp.weight_distance_to_limit =
                weight_distance(replay_weights(buffer, scheme), *limit);
        log.checkpoints.push_back(std::move(cp));
        ++next_checkpoint;
    };

    int s = random_start();
    int steps = 0;
    double ep_return = 0.0;
    long long episode = 0;
    long long t = 0;

    while (true) {
        if (cfg.max_total_iterations > 0 && t >= cfg.max_total_iterations) break;
        if (cfg.max_total_iterations == 0 && episode >= cfg.episodes) break;
        ++t;

        if (t > cfg.t0 && cfg.v > 0.0 && unif(rng) < cfg.v) {
            TransitionKey key;
            if (scheme.kind == SchemeKind::frozen) {
                key = cfg.frozen_weights->sample(rng);
            } else {
                key = buffer.sample(rng, scheme);
            }
            auto [rs, ra, rns, rr] = key;
            update(rs, ra, rr, rns, t);
            ++log.replay_count;
            maybe_checkpoint(t);
            continue;
        }

        ++state_visits[s];
        int a;
        if (t <= cfg.t0 || unif(rng) < glie_epsilon(state_visits[s], cfg.glie)) {
            a = std::min(n_actions - 1, static_cast<int>(unif(rng) * n_actions));
        } else {
            a = q.argmax(s);
        }
        auto [ns, r] = mdp.sample_step(rng, s, a);
        update(s, a, r, ns, t);
        buffer.record_transition(s, a, r, ns);
        ++log.env_steps;
        ep_return += r;
        ++steps;
        maybe_checkpoint(t);

        if (mdp.is_terminal(ns) || steps >= cap) {
            log.episode_returns.push_back(ep_return);
            log.episode_steps.push_back(steps);
            ++episode;
            steps = 0;
            ep_return = 0.0;
            s = random_start();
            if (cfg.max_total_iterations == 0 && episode >= cfg.episodes) break;
        } else {
            s = ns;
        }
    }

    log.total_iterations = t;
    return {std::move(q), std::move(log), std::move(buffer)};
}

RunResult run_plain_q(const TabularMdp& mdp, LearnerConfig cfg) {
    cfg.v = 0.0;
    SchemeConfig scheme;
    scheme.kind = SchemeKind::none;
    return run_algorithm1(mdp, cfg, scheme);
}

}  // namespace replay_shaper
