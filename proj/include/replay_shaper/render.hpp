#pragma once

#include <string>
#include <vector>

#include "replay_shaper/mdp.hpp"

namespace replay_shaper {

/// One row per grid row: arrows for the greedy action, G for goal cells,
/// C for cliff cells.
std::string ascii_policy(const GridWorldSpec& spec, const std::vector<int>& policy);

/// Stand-alone SVG of the policy grid. Risky (cell, action) pairs whose
/// greedy arrow matches the risky action are drawn in red; goal green,
/// cliff grey. No timestamps, so output is byte-stable.
std::string svg_policy(const GridWorldSpec& spec, const std::vector<int>& policy);

}  // namespace replay_shaper
