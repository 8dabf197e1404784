#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ccbf/backup_cbf.hpp"
#include "ccbf/model.hpp"
#include "ccbf/qp_filter.hpp"

namespace ccbf {

/// Everything the harness needs to close the loop on a concrete system.
/// Simulation runs in the scenario's working units; the log_* hooks convert
/// to the units written to CSV.
struct Scenario {
  std::string name;
  ControlAffineModel model;
  std::vector<Barrier> safety;           // psi_i, working units
  std::vector<BackupPolicy> policies;    // backup sets with h_j attached
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> nominal;
  InputRows input;
  Eigen::VectorXd initial_state;
  Horizon horizon;
  double dt_ctrl = 0.0;
  double duration = 0.0;
  int default_single_policy = 0;

  // Logging hooks.
  std::string time_column = "t";
  std::vector<std::string> state_columns;
  std::function<std::vector<double>(const Eigen::VectorXd&)> log_state;
  std::function<double(double)> log_time;
  std::function<std::vector<double>(const Eigen::VectorXd&)> log_input;
  std::string tracking_column = "track_err";
  std::function<double(const Eigen::VectorXd&, double)> tracking_error;
  std::vector<std::pair<std::string,
                        std::function<double(const Eigen::VectorXd&)>>>
      extra_columns;

  // Two-parameter slice through the state space for grid export.
  std::pair<std::string, std::string> grid_params;
  std::array<double, 4> grid_range{};  // a_min, a_max, b_min, b_max
  std::function<Eigen::VectorXd(double, double)> grid_state;

  std::vector<Barrier> barrier_set() const {
    std::vector<Barrier> out;
    out.reserve(policies.size());
    for (const BackupPolicy& p : policies) {
      out.push_back(p.terminal_barrier);
    }
    return out;
  }
};

}  // namespace ccbf
