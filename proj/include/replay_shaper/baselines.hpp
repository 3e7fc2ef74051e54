#pragma once

#include <map>

#include "replay_shaper/learner.hpp"

namespace replay_shaper {

struct RiskSensitiveConfig {
    LearnerConfig base;       // v is ignored; the baseline never replays
    double kappa = 0.0;       // in (-1,1); positive is risk averse
    bool record_td_histogram = false;
};

struct BaselineResult {
    QTable q;
    RunLog log;
    std::map<int, long long> td_histogram;  // unit-width bins keyed by floor(delta)
};

/// Risk-sensitive Q-learning: positive TD errors are scaled by 1-kappa and
/// negative ones by 1+kappa. kappa=0 reproduces plain Q-learning on the same
/// RNG stream bit for bit.
BaselineResult run_risk_sensitive_q(const TabularMdp& mdp, const RiskSensitiveConfig& cfg);

/// Worst-case Q-hat learning: values each pair by its worst observed
/// successor, with rewards entering through per-(s,a,s') running means so
/// reward noise is averaged rather than minimized. Optimistic initialization
/// at r_max/(1-gamma). On deterministic dynamics this coincides with the
/// expected-return Bellman solution.
BaselineResult run_worst_case_q(const TabularMdp& mdp, const LearnerConfig& cfg);

}  // namespace replay_shaper
