#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "replay_shaper/effective_model.hpp"
#include "replay_shaper/mdp.hpp"
#include "replay_shaper/replay.hpp"

namespace replay_shaper {

/// Random dense-ish MDP for property suites: 2-3 outcomes per pair, rewards
/// uniform in [-10, 10]. No terminal states unless requested.
TabularMdp random_mdp(Rng& rng, int num_states = 5, int num_actions = 2,
                      double gamma = 0.9, bool with_terminal = false);

/// Random normalized weight table supported on the MDP's kernel tuples.
WeightFunction random_weights(const TabularMdp& mdp, Rng& rng);

/// The update-frequency-corrected biased model. `env_pair_occupancy[s*A+a]`
/// is the fraction of environment steps that updated (s,a); each pair's
/// replay share is then v*m / (v*m + (1-v)*d) instead of the
/// uniform-occupancy form v*m / (v*m + (1-v)).
EffectiveModel occupancy_corrected_model(const TabularMdp& mdp, const WeightFunction& w,
                                         double v,
                                         const std::vector<double>& env_pair_occupancy);

/// One member of the Theorem 2 desk-check family: a hub state whose risky
/// action dominates the total variance, exit states with fixed values, and
/// the exactly-concentrated limit weights on the risky pair's minimal-reward
/// branch.
struct SwitchInstance {
    TabularMdp mdp;
    WeightFunction w_inf;
    int s_i = 0;
    int a_i = 0;
};

SwitchInstance make_switch_instance(Rng& rng, double gamma = 0.9);

struct SuiteResult {
    std::string name;
    bool passed = false;
    nlohmann::ordered_json details;
};

SuiteResult verify_contraction(std::uint64_t seed);
SuiteResult verify_noise(std::uint64_t seed);
SuiteResult verify_lemma4(std::uint64_t seed);
SuiteResult verify_theorem1(std::uint64_t seed);
SuiteResult verify_theorem2(std::uint64_t seed);

std::vector<SuiteResult> verify_all(std::uint64_t seed);

}  // namespace replay_shaper
