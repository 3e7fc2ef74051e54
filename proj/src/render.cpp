#include "replay_shaper/render.hpp"

#include <algorithm>
#include <sstream>

namespace replay_shaper {

namespace {
const char* kArrows[4] = {"↑", "↓", "←", "→"};  // up down left right
}

std::string ascii_policy(const GridWorldSpec& spec, const std::vector<int>& policy) {
    std::ostringstream out;
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            int s = spec.cell(r, c);
            if (spec.goal_cells.count(s)) {
                out << 'G';
            } else if (spec.cliff_cells.count(s)) {
                out << 'C';
            } else {
                out << kArrows[policy[s]];
            }
        }
        out << '\n';
    }
    return out.str();
}

std::string svg_policy(const GridWorldSpec& spec, const std::vector<int>& policy) {
    const int cell = 40;
    const int w = spec.cols * cell;
    const int h = spec.rows * cell;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<defs>\n"
        << "<marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"3\" refY=\"3\" "
           "orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" fill=\"context-stroke\"/></marker>\n"
        << "</defs>\n";

    auto is_risky = [&](int s, int a) {
        return std::find(spec.risky_pairs.begin(), spec.risky_pairs.end(),
                         std::make_pair(s, a)) != spec.risky_pairs.end();
    };

    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            int s = spec.cell(r, c);
            int x = c * cell, y = r * cell;
            const char* fill = "white";
            if (spec.goal_cells.count(s)) fill = "#b6e3b6";
            if (spec.cliff_cells.count(s)) fill = "#bbbbbb";
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
                << "\" height=\"" << cell << "\" fill=\"" << fill
                << "\" stroke=\"black\"/>\n";
            if (spec.goal_cells.count(s) || spec.cliff_cells.count(s)) continue;

            int a = policy[s];
            double cx = x + cell / 2.0, cy = y + cell / 2.0;
            double dx = 0.0, dy = 0.0;
            if (a == kActionUp) dy = -1.0;
            if (a == kActionDown) dy = 1.0;
            if (a == kActionLeft) dx = -1.0;
            if (a == kActionRight) dx = 1.0;
            double len = cell * 0.3;
            const char* stroke = is_risky(s, a) ? "red" : "black";
            out << "<line x1=\"" << cx - dx * len << "\" y1=\"" << cy - dy * len << "\" x2=\""
                << cx + dx * len << "\" y2=\"" << cy + dy * len << "\" stroke=\"" << stroke
                << "\" stroke-width=\"2\" marker-end=\"url(#head)\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace replay_shaper
