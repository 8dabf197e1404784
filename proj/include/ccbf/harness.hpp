#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccbf/compatibility.hpp"
#include "ccbf/scenario.hpp"
#include "ccbf/scenario_attitude.hpp"
#include "ccbf/scenario_orbit.hpp"

namespace ccbf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One closed-loop experiment: scenario, filter variant and the knobs shared
/// by both scenarios. Values below zero mean "use the scenario default".
struct ScenarioConfig {
  std::string scenario = "orbit";
  FilterVariant variant = FilterVariant::AggregatedImplicit;
  double duration = -1.0;
  double dt_ctrl = -1.0;
  double horizon_T = -1.0;
  int horizon_N = -1;
  bool include_tau0 = false;
  std::uint64_t seed = 0;
  double c_omega = 0.1;
  double alpha_gain = 1.0;
  ScaleFunction::Kind rho = ScaleFunction::Kind::Absolute;
  int single_policy = -1;          // set used by cbf / bcbf variants
  std::vector<int> policy_subset;  // empty keeps all sets
  double qp_tol = 1e-10;
  int qp_max_iter = 300;
  std::optional<Eigen::VectorXd> initial_state;
  attitude::AttitudeParams attitude;
  orbit::OrbitParams orbit;
};

/// Parse a config JSON document; unknown keys are an error.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config_file(const std::string& path);
FilterVariant parse_variant(const std::string& name);

/// Build the configured scenario with overrides applied.
Scenario build_scenario(const ScenarioConfig& config);

struct SimStep {
  double t = 0.0;
  Eigen::VectorXd state;
  Eigen::VectorXd input;
  double omega = 0.0;
  QpStatus status = QpStatus::Optimal;
  std::vector<double> barrier_values;  // h_I^fin_j (or h_j for explicit variants)
  double h_agg = 0.0;
  std::vector<double> psi_values;
  double tracking_error = 0.0;
};

struct Metrics {
  std::string variant;
  double mean_tracking_error = 0.0;
  double max_tracking_error = 0.0;
  double min_h_agg = 0.0;
  std::vector<double> min_psi;
  double max_input_norm = 0.0;
  int non_optimal_steps = 0;
  double wall_time_s = 0.0;

  std::string to_json() const;
};

struct SimLog {
  std::vector<SimStep> steps;
  Metrics metrics;
};

/// Zero-order-hold closed loop: filter at each control step, RK4 plant
/// substeps in between. Infeasible solves hold the previous input and mark
/// the step.
SimLog run_closed_loop(const ScenarioConfig& config);
SimLog run_closed_loop(const ScenarioConfig& config, const Scenario& scenario);

/// Run each variant under identical configuration and seed.
std::vector<Metrics> compare_variants(const ScenarioConfig& config,
                                      const std::vector<FilterVariant>& variants);

/// Raster of h_j, h_I^fin_j and h_agg over the scenario's two-parameter
/// slice. Writes header + row-major rows to `path`.
void export_grid(const ScenarioConfig& config, const Scenario& scenario,
                 int width, int height, const std::array<double, 4>& range,
                 const std::string& path);

void export_csv(const SimLog& log, const Scenario& scenario,
                const std::string& path);
void export_metrics_json(const std::vector<Metrics>& metrics,
                         const std::string& path);

/// Re-evaluate every logged optimal step's rows at the logged (state, input);
/// returns the worst slack (>= -1e-8 expected).
double replay_min_slack(const ScenarioConfig& config, const Scenario& scenario,
                        const SimLog& log);

}  // namespace ccbf
