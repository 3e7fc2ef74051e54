#include "replay_shaper/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace replay_shaper {

namespace {

/// Shared epsilon-greedy environment loop. The RNG consumption order matches
/// run_algorithm1 with v=0 exactly; `update` must not draw from the stream.
template <typename UpdateFn>
std::pair<QTable, RunLog> env_loop(const TabularMdp& mdp, const LearnerConfig& cfg,
                                   double q_init, UpdateFn update) {
    if (cfg.alpha_exponent <= 0.5 || cfg.alpha_exponent > 1.0)
        throw std::invalid_argument("env_loop: alpha_exponent must be in (0.5,1]");
    if (cfg.t0 < 1) throw std::invalid_argument("env_loop: t0 must be >= 1");
    if (cfg.episodes < 1 && cfg.max_total_iterations < 1)
        throw std::invalid_argument("env_loop: need episodes or an iteration cap");

    const int n_states = mdp.num_states();
    const int n_actions = mdp.num_actions();
    const int cap = cfg.max_steps_per_episode > 0 ? cfg.max_steps_per_episode : 10 * n_states;

    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    QTable q(n_states, n_actions, q_init);
    for (int s : mdp.terminal_states())
        for (int a = 0; a < n_actions; ++a) q(s, a) = 0.0;

    std::vector<long long> state_visits(n_states, 0);
    RunLog log;
    log.non_glie_schedule = cfg.glie.p == 0.0;

    const auto nonterm = mdp.nonterminal_states();
    auto random_start = [&]() {
        return nonterm[std::min(nonterm.size() - 1,
                                static_cast<size_t>(unif(rng) * nonterm.size()))];
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

        ++state_visits[s];
        int a;
        if (t <= cfg.t0 || unif(rng) < glie_epsilon(state_visits[s], cfg.glie)) {
            a = std::min(n_actions - 1, static_cast<int>(unif(rng) * n_actions));
        } else {
            a = q.argmax(s);
        }
        auto [ns, r] = mdp.sample_step(rng, s, a);
        update(q, s, a, r, ns, t);
        ++log.env_steps;
        ep_return += r;
        ++steps;

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
    return {std::move(q), std::move(log)};
}

}  // namespace

BaselineResult run_risk_sensitive_q(const TabularMdp& mdp, const RiskSensitiveConfig& cfg) {
    if (cfg.kappa <= -1.0 || cfg.kappa >= 1.0)
        throw std::invalid_argument("run_risk_sensitive_q: kappa must be in (-1,1)");

    BaselineResult result;
    std::vector<long long> pair_updates(
        static_cast<size_t>(mdp.num_states()) * mdp.num_actions(), 0);

    auto update = [&](QTable& q, int s, int a, double r, int ns, long long t) {
        double alpha = cfg.base.global_t_alpha
                           ? learning_rate(t, cfg.base.alpha_exponent)
                           : learning_rate(++pair_updates[s * mdp.num_actions() + a],
                                           cfg.base.alpha_exponent);
        double cont = mdp.is_terminal(ns) ? 0.0 : q.max_value(ns);
        double delta = r + cfg.base.gamma * cont - q(s, a);
        double factor = delta > 0.0 ? 1.0 - cfg.kappa : 1.0 + cfg.kappa;
        q(s, a) += alpha * factor * delta;
        if (cfg.record_td_histogram)
            ++result.td_histogram[static_cast<int>(std::floor(delta))];
    };

    auto [q, log] = env_loop(mdp, cfg.base, cfg.base.c0, update);
    result.q = std::move(q);
    result.log = std::move(log);
    return result;
}

BaselineResult run_worst_case_q(const TabularMdp& mdp, const LearnerConfig& cfg) {
    const int n_actions = mdp.num_actions();
    // per (s,a): observed successors with reward running means
    struct Successor {
        long long n = 0;
        double reward_sum = 0.0;
    };
    std::vector<std::map<int, Successor>> observed(
        static_cast<size_t>(mdp.num_states()) * n_actions);

    double q_init = mdp.r_max() / (1.0 - cfg.gamma);

    auto update = [&](QTable& q, int s, int a, double r, int ns, long long) {
        auto& succ = observed[s * n_actions + a][ns];
        succ.n += 1;
        succ.reward_sum += r;
        double worst = q_init;
        bool first = true;
        for (const auto& [nxt, stats] : observed[s * n_actions + a]) {
            double mean_r = stats.reward_sum / static_cast<double>(stats.n);
            double cont = mdp.is_terminal(nxt) ? 0.0 : q.max_value(nxt);
            double value = mean_r + cfg.gamma * cont;
            worst = first ? value : std::min(worst, value);
            first = false;
        }
        q(s, a) = worst;
    };

    BaselineResult result;
    auto [q, log] = env_loop(mdp, cfg, q_init, update);
    result.q = std::move(q);
    result.log = std::move(log);
    return result;
}

}  // namespace replay_shaper
