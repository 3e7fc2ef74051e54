#pragma once

#include <string>
#include <vector>

namespace replay_shaper {

/// Dense action-value table, row-major over (state, action).
class QTable {
  public:
    QTable() = default;
    QTable(int num_states, int num_actions, double fill = 0.0)
        : num_states_(num_states),
          num_actions_(num_actions),
          data_(static_cast<size_t>(num_states) * num_actions, fill) {}

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }

    double operator()(int s, int a) const { return data_[s * num_actions_ + a]; }
    double& operator()(int s, int a) { return data_[s * num_actions_ + a]; }

    double max_value(int s) const;
    /// Greedy action; ties break toward the lowest action index.
    int argmax(int s) const;

    double max_norm() const;
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    std::string to_json() const;
    static QTable from_json(const std::string& text);

  private:
    int num_states_ = 0;
    int num_actions_ = 0;
    std::vector<double> data_;
};

/// ‖a − b‖∞; tables must share a shape.
double max_norm_diff(const QTable& a, const QTable& b);

}  // namespace replay_shaper
