#include "replay_shaper/qtable.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace replay_shaper {

double QTable::max_value(int s) const {
    double best = data_[s * num_actions_];
    for (int a = 1; a < num_actions_; ++a) best = std::max(best, data_[s * num_actions_ + a]);
    return best;
}

int QTable::argmax(int s) const {
    double best = max_value(s);
    // values within rounding distance of the max count as tied, so the
    // lowest-index rule is stable under floating-point noise
    double tol = 1e-8 * (1.0 + std::abs(best));
    for (int a = 0; a < num_actions_; ++a)
        if (data_[s * num_actions_ + a] >= best - tol) return a;
    return 0;
}

double QTable::max_norm() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
}

double max_norm_diff(const QTable& a, const QTable& b) {
    if (a.num_states() != b.num_states() || a.num_actions() != b.num_actions())
        throw std::invalid_argument("max_norm_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

std::string QTable::to_json() const {
    nlohmann::ordered_json j;
    j["num_states"] = num_states_;
    j["num_actions"] = num_actions_;
    j["values"] = data_;
    return j.dump(2);
}

QTable QTable::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    QTable q(j.at("num_states"), j.at("num_actions"));
    q.data_ = j.at("values").get<std::vector<double>>();
    if (q.data_.size() != static_cast<size_t>(q.num_states_) * q.num_actions_)
        throw std::invalid_argument("QTable::from_json: value count mismatch");
    return q;
}

}  // namespace replay_shaper
