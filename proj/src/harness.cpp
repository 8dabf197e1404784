#include "ccbf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

namespace ccbf {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& msg) {
  throw ConfigError("config: " + msg);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      config_fail("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    out = obj.at(key).get<T>();
  }
}

void parse_attitude(const json& obj, attitude::AttitudeParams& p) {
  reject_unknown(obj,
                 {"inertia_transverse", "inertia_axial", "u_max",
                  "theta_safe_deg", "horizon_T", "horizon_N", "pd_kp", "pd_kd",
                  "spin_rate", "input_facets", "sat_knee", "ref_azimuth_rate",
                  "ref_osc_rate", "ref_osc_amp_deg", "nominal_kp", "nominal_kd", "dt_ctrl", "duration",
                  "gammas", "calibration_seed", "calibration_samples"},
                 "attitude");
  read_field(obj, "inertia_transverse", p.inertia_transverse);
  read_field(obj, "inertia_axial", p.inertia_axial);
  read_field(obj, "u_max", p.u_max);
  read_field(obj, "theta_safe_deg", p.theta_safe_deg);
  read_field(obj, "horizon_T", p.horizon_T);
  read_field(obj, "horizon_N", p.horizon_N);
  read_field(obj, "pd_kp", p.pd_kp);
  read_field(obj, "pd_kd", p.pd_kd);
  read_field(obj, "spin_rate", p.spin_rate);
  read_field(obj, "input_facets", p.input_facets);
  read_field(obj, "sat_knee", p.sat_knee);
  read_field(obj, "ref_azimuth_rate", p.ref_azimuth_rate);
  read_field(obj, "ref_osc_rate", p.ref_osc_rate);
  read_field(obj, "ref_osc_amp_deg", p.ref_osc_amp_deg);
  read_field(obj, "nominal_kp", p.nominal_kp);
  read_field(obj, "nominal_kd", p.nominal_kd);
  read_field(obj, "dt_ctrl", p.dt_ctrl);
  read_field(obj, "duration", p.duration);
  read_field(obj, "gammas", p.gammas);
  read_field(obj, "calibration_seed", p.calibration_seed);
  read_field(obj, "calibration_samples", p.calibration_samples);
}

void parse_orbit(const json& obj, orbit::OrbitParams& p) {
  reject_unknown(obj,
                 {"grav_const", "asteroid_mass", "u_max", "horizon_T",
                  "horizon_N", "keepin_radius", "p_out", "e_out", "p_des",
                  "e_des", "gamma", "num_backups", "char_length",
                  "radius_lo_factor", "radius_hi_factor", "sontag_eps_b",
                  "sat_knee", "tracker_kp", "tracker_kv", "tracker_kt",
                  "dt_ctrl", "duration"},
                 "orbit");
  read_field(obj, "grav_const", p.grav_const);
  read_field(obj, "asteroid_mass", p.asteroid_mass);
  read_field(obj, "u_max", p.u_max);
  read_field(obj, "horizon_T", p.horizon_T);
  read_field(obj, "horizon_N", p.horizon_N);
  read_field(obj, "keepin_radius", p.keepin_radius);
  read_field(obj, "p_out", p.p_out);
  read_field(obj, "e_out", p.e_out);
  read_field(obj, "p_des", p.p_des);
  read_field(obj, "e_des", p.e_des);
  read_field(obj, "gamma", p.gamma);
  read_field(obj, "num_backups", p.num_backups);
  read_field(obj, "char_length", p.char_length);
  read_field(obj, "radius_lo_factor", p.radius_lo_factor);
  read_field(obj, "radius_hi_factor", p.radius_hi_factor);
  read_field(obj, "sontag_eps_b", p.sontag_eps_b);
  read_field(obj, "sat_knee", p.sat_knee);
  read_field(obj, "tracker_kp", p.tracker_kp);
  read_field(obj, "tracker_kv", p.tracker_kv);
  read_field(obj, "tracker_kt", p.tracker_kt);
  read_field(obj, "dt_ctrl", p.dt_ctrl);
  read_field(obj, "duration", p.duration);
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

FilterVariant parse_variant(const std::string& name) {
  if (name == "cbf") return FilterVariant::Standard;
  if (name == "comb") return FilterVariant::GenCombinatorial;
  if (name == "bcbf") return FilterVariant::BackupSingle;
  if (name == "comb-bcbf") return FilterVariant::AggregatedImplicit;
  config_fail("unknown variant '" + name +
              "' (expected cbf|comb|bcbf|comb-bcbf)");
}

ScenarioConfig parse_config(const std::string& json_text) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::parse_error& err) {
    config_fail(std::string("invalid JSON: ") + err.what());
  }
  reject_unknown(obj,
                 {"scenario", "variant", "duration", "dt_ctrl", "horizon_T",
                  "horizon_N", "include_tau0", "seed", "c_omega", "alpha_gain", "rho",
                  "single_policy", "policy_subset", "qp_tol", "qp_max_iter",
                  "initial_state", "attitude", "orbit"},
                 "top level");

  ScenarioConfig cfg;
  read_field(obj, "scenario", cfg.scenario);
  if (cfg.scenario != "attitude" && cfg.scenario != "orbit") {
    config_fail("scenario must be 'attitude' or 'orbit'");
  }
  if (obj.contains("variant")) {
    cfg.variant = parse_variant(obj.at("variant").get<std::string>());
  }
  read_field(obj, "duration", cfg.duration);
  read_field(obj, "dt_ctrl", cfg.dt_ctrl);
  read_field(obj, "horizon_T", cfg.horizon_T);
  read_field(obj, "horizon_N", cfg.horizon_N);
  read_field(obj, "include_tau0", cfg.include_tau0);
  read_field(obj, "seed", cfg.seed);
  read_field(obj, "c_omega", cfg.c_omega);
  read_field(obj, "alpha_gain", cfg.alpha_gain);
  if (obj.contains("rho")) {
    const std::string rho = obj.at("rho").get<std::string>();
    if (rho == "absolute") {
      cfg.rho = ScaleFunction::Kind::Absolute;
    } else if (rho == "quadratic") {
      cfg.rho = ScaleFunction::Kind::Quadratic;
    } else {
      config_fail("rho must be 'absolute' or 'quadratic'");
    }
  }
  read_field(obj, "single_policy", cfg.single_policy);
  read_field(obj, "policy_subset", cfg.policy_subset);
  read_field(obj, "qp_tol", cfg.qp_tol);
  read_field(obj, "qp_max_iter", cfg.qp_max_iter);
  if (obj.contains("initial_state")) {
    const std::vector<double> vals =
        obj.at("initial_state").get<std::vector<double>>();
    cfg.initial_state =
        Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
  }
  if (obj.contains("attitude")) {
    parse_attitude(obj.at("attitude"), cfg.attitude);
  }
  if (obj.contains("orbit")) {
    parse_orbit(obj.at("orbit"), cfg.orbit);
  }
  return cfg;
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    config_fail("cannot open config file '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

Scenario build_scenario(const ScenarioConfig& config) {
  Scenario sc;
  if (config.scenario == "attitude") {
    attitude::AttitudeParams p = config.attitude;
    if (config.horizon_T > 0) p.horizon_T = config.horizon_T;
    if (config.horizon_N > 0) p.horizon_N = config.horizon_N;
    if (config.dt_ctrl > 0) p.dt_ctrl = config.dt_ctrl;
    if (config.duration >= 0) p.duration = config.duration;
    sc = attitude::make_scenario(p);
    if (config.initial_state) {
      if (config.initial_state->size() != 12) {
        config_fail("attitude initial_state must have 12 entries");
      }
      sc.initial_state = *config.initial_state;
    }
  } else {
    orbit::OrbitParams p = config.orbit;
    if (config.horizon_T > 0) p.horizon_T = config.horizon_T;
    if (config.horizon_N > 0) p.horizon_N = config.horizon_N;
    if (config.dt_ctrl > 0) p.dt_ctrl = config.dt_ctrl;
    if (config.duration >= 0) p.duration = config.duration;
    sc = orbit::make_scenario(p);
    if (config.initial_state) {
      if (config.initial_state->size() != 4) {
        config_fail("orbit initial_state must have 4 entries (SI units)");
      }
      sc.initial_state =
          orbit::make_scales(p).state_to_nd(*config.initial_state);
    }
  }

  sc.horizon.include_tau0 = config.include_tau0;

  if (!config.policy_subset.empty()) {
    std::vector<BackupPolicy> kept;
    for (int idx : config.policy_subset) {
      if (idx < 0 || idx >= static_cast<int>(sc.policies.size())) {
        config_fail("policy_subset index out of range");
      }
      kept.push_back(sc.policies[idx]);
    }
    sc.policies = std::move(kept);
    sc.default_single_policy =
        std::min<int>(sc.default_single_policy,
                      static_cast<int>(sc.policies.size()) - 1);
  }
  return sc;
}

namespace {

// One filter evaluation at (x, t) plus the barrier values that go in the log.
struct StepEval {
  FilterResult filter;
  std::vector<double> barrier_values;
  double h_agg = 0.0;
};

int resolve_single_policy(const ScenarioConfig& cfg, const Scenario& sc) {
  int idx = cfg.single_policy >= 0 ? cfg.single_policy : sc.default_single_policy;
  if (idx < 0 || idx >= static_cast<int>(sc.policies.size())) {
    config_fail("single_policy index out of range");
  }
  return idx;
}

StepEval evaluate_filter(const Scenario& sc, const ScenarioConfig& cfg,
                         const Eigen::VectorXd& x, double t) {
  const ClassKappaE alpha(cfg.alpha_gain);
  const ScaleFunction rho(cfg.rho);
  const Eigen::VectorXd u_des = sc.nominal(x, t);

  StepEval ev;
  switch (cfg.variant) {
    case FilterVariant::Standard: {
      const int j = resolve_single_policy(cfg, sc);
      const std::vector<Barrier> barriers = {sc.policies[j].terminal_barrier};
      ev.filter = filter_standard(sc.model, x, u_des, barriers, alpha, sc.input);
      for (const BackupPolicy& p : sc.policies) {
        ev.barrier_values.push_back(p.terminal_barrier.value(x));
      }
      ev.h_agg = ev.barrier_values[j];
      break;
    }
    case FilterVariant::Combinatorial:
    case FilterVariant::GenCombinatorial: {
      const std::vector<Barrier> barriers = sc.barrier_set();
      CompositeSpec spec;  // r = 1, disjunction
      if (cfg.variant == FilterVariant::Combinatorial) {
        ev.filter = filter_combinatorial(sc.model, x, u_des, barriers, spec,
                                         alpha, sc.input);
      } else {
        ev.filter = filter_gen_combinatorial(sc.model, x, u_des, barriers, spec,
                                             alpha, rho, cfg.c_omega, sc.input);
      }
      for (const Barrier& h : barriers) {
        ev.barrier_values.push_back(h.value(x));
      }
      ev.h_agg = *std::max_element(ev.barrier_values.begin(),
                                   ev.barrier_values.end());
      break;
    }
    case FilterVariant::BackupSingle: {
      const int j = resolve_single_policy(cfg, sc);
      const ImplicitCbfEval eval =
          eval_implicit_cbf(sc.model, sc.policies[j], sc.safety, x, sc.horizon);
      const std::vector<ConstraintRow> rows = assemble_implicit_constraints(
          {eval}, eval.implicit_value, rho, sc.model, x);
      ev.filter = filter_backup_single(u_des, rows, alpha, sc.input);
      ev.barrier_values.assign(sc.policies.size(),
                               std::numeric_limits<double>::quiet_NaN());
      ev.barrier_values[j] = eval.implicit_value;
      ev.h_agg = eval.implicit_value;
      break;
    }
    case FilterVariant::AggregatedImplicit: {
      std::vector<ImplicitCbfEval> evals;
      evals.reserve(sc.policies.size());
      for (const BackupPolicy& p : sc.policies) {
        evals.push_back(eval_implicit_cbf(sc.model, p, sc.safety, x, sc.horizon));
      }
      const double h_agg = aggregated_value(evals);
      const std::vector<ConstraintRow> rows =
          assemble_implicit_constraints(evals, h_agg, rho, sc.model, x);
      ev.filter =
          filter_aggregated_implicit(u_des, rows, alpha, cfg.c_omega, sc.input);
      for (const ImplicitCbfEval& e : evals) {
        ev.barrier_values.push_back(e.implicit_value);
      }
      ev.h_agg = h_agg;
      break;
    }
  }
  return ev;
}

}  // namespace

SimLog run_closed_loop(const ScenarioConfig& config) {
  return run_closed_loop(config, build_scenario(config));
}

SimLog run_closed_loop(const ScenarioConfig& config, const Scenario& scenario) {
  const auto start = std::chrono::steady_clock::now();
  const Scenario& sc = scenario;
  const int steps =
      sc.duration <= 0.0
          ? 0
          : static_cast<int>(std::llround(sc.duration / sc.dt_ctrl));
  const int substeps = 4;

  if (config.variant == FilterVariant::Standard ||
      config.variant == FilterVariant::BackupSingle) {
    resolve_single_policy(config, sc);  // validate before the loop
  }

  SimLog log;
  log.metrics.variant = to_string(config.variant);
  log.metrics.min_psi.assign(sc.safety.size(),
                             std::numeric_limits<double>::infinity());
  log.metrics.min_h_agg = std::numeric_limits<double>::infinity();

  Eigen::VectorXd x = sc.initial_state;
  Eigen::VectorXd u_prev = Eigen::VectorXd::Zero(sc.model.input_dim);
  double track_sum = 0.0;

  for (int k = 0; k <= steps; ++k) {
    const double t = k * sc.dt_ctrl;
    StepEval ev;
    bool solver_threw = false;
    try {
      ev = evaluate_filter(sc, config, x, t);
    } catch (const std::exception& err) {
      std::cerr << "ccbf::run_closed_loop: filter failed at t=" << t << ": "
                << err.what() << "\n";
      solver_threw = true;
    }

    SimStep step;
    step.t = t;
    step.state = x;
    if (!solver_threw && ev.filter.optimal()) {
      step.input = ev.filter.u;
      step.omega = ev.filter.omega;
      step.status = ev.filter.qp.status;
    } else {
      step.input = u_prev;  // hold previous input, surface the event
      step.omega = 0.0;
      step.status = solver_threw ? QpStatus::MaxIter : ev.filter.qp.status;
      ++log.metrics.non_optimal_steps;
    }
    if (!solver_threw) {
      step.barrier_values = ev.barrier_values;
      step.h_agg = ev.h_agg;
    }
    for (const Barrier& psi : sc.safety) {
      step.psi_values.push_back(psi.value(x));
    }
    step.tracking_error = sc.tracking_error(x, t);

    track_sum += step.tracking_error;
    log.metrics.max_tracking_error =
        std::max(log.metrics.max_tracking_error, step.tracking_error);
    log.metrics.min_h_agg = std::min(log.metrics.min_h_agg, step.h_agg);
    for (std::size_t i = 0; i < step.psi_values.size(); ++i) {
      log.metrics.min_psi[i] =
          std::min(log.metrics.min_psi[i], step.psi_values[i]);
    }
    log.metrics.max_input_norm =
        std::max(log.metrics.max_input_norm, step.input.norm());
    u_prev = step.input;
    log.steps.push_back(std::move(step));

    if (k == steps) break;

    // Zero-order hold: integrate the plant under the held input.
    VectorField plant;
    plant.dim = sc.model.state_dim;
    const Eigen::VectorXd u_hold = u_prev;
    plant.eval = [&sc, &u_hold](const Eigen::VectorXd& s) {
      return sc.model.closed_loop(s, u_hold);
    };
    plant.project = sc.model.project;
    try {
      for (int s = 0; s < substeps; ++s) {
        x = rk4_step(plant, x, sc.dt_ctrl / substeps);
      }
    } catch (const std::exception& err) {
      std::cerr << "ccbf::run_closed_loop: plant integration failed at t=" << t
                << ": " << err.what() << "\n";
      break;
    }
  }

  log.metrics.mean_tracking_error =
      log.steps.empty() ? 0.0 : track_sum / log.steps.size();
  log.metrics.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return log;
}

std::vector<Metrics> compare_variants(
    const ScenarioConfig& config, const std::vector<FilterVariant>& variants) {
  std::vector<Metrics> table;
  for (FilterVariant variant : variants) {
    ScenarioConfig cfg = config;
    cfg.variant = variant;
    table.push_back(run_closed_loop(cfg).metrics);
  }
  return table;
}

void export_grid(const ScenarioConfig& config, const Scenario& scenario,
                 int width, int height, const std::array<double, 4>& range,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("export_grid: cannot open '" + path + "'");
  }
  const int p = static_cast<int>(scenario.policies.size());
  out << "# slice " << scenario.grid_params.first << "=" << format_value(range[0])
      << ":" << format_value(range[1]) << " " << scenario.grid_params.second
      << "=" << format_value(range[2]) << ":" << format_value(range[3])
      << " res " << width << "x" << height << "\n";
  out << "x1,x2";
  for (int j = 1; j <= p; ++j) out << ",h_" << j;
  for (int j = 1; j <= p; ++j) out << ",hIfin_" << j;
  out << ",h_agg\n";

  for (int iy = 0; iy < height; ++iy) {
    const double b = height == 1 ? range[2]
                                 : range[2] + (range[3] - range[2]) * iy / (height - 1);
    for (int ix = 0; ix < width; ++ix) {
      const double a = width == 1 ? range[0]
                                  : range[0] + (range[1] - range[0]) * ix / (width - 1);
      const Eigen::VectorXd x = scenario.grid_state(a, b);
      out << format_value(a) << "," << format_value(b);
      std::vector<double> implicit;
      for (const BackupPolicy& pol : scenario.policies) {
        out << "," << format_value(pol.terminal_barrier.value(x));
      }
      for (const BackupPolicy& pol : scenario.policies) {
        const ImplicitCbfEval ev = eval_implicit_cbf(scenario.model, pol,
                                                     scenario.safety, x,
                                                     scenario.horizon);
        implicit.push_back(ev.implicit_value);
        out << "," << format_value(ev.implicit_value);
      }
      out << ","
          << format_value(*std::max_element(implicit.begin(), implicit.end()))
          << "\n";
    }
  }
  (void)config;
}

void export_csv(const SimLog& log, const Scenario& scenario,
                const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("export_csv: cannot open '" + path + "'");
  }
  const int p = static_cast<int>(scenario.policies.size());
  out << scenario.time_column;
  for (const std::string& name : scenario.state_columns) out << "," << name;
  for (int i = 1; i <= scenario.model.input_dim; ++i) out << ",u" << i;
  out << ",omega,status,h_agg";
  for (int j = 1; j <= p; ++j) out << ",hI_" << j;
  for (std::size_t i = 1; i <= scenario.safety.size(); ++i) out << ",psi" << i;
  out << "," << scenario.tracking_column;
  for (const auto& [name, fn] : scenario.extra_columns) out << "," << name;
  out << "\n";

  for (const SimStep& step : log.steps) {
    out << format_value(scenario.log_time(step.t));
    for (double v : scenario.log_state(step.state)) out << "," << format_value(v);
    for (double v : scenario.log_input(step.input)) out << "," << format_value(v);
    out << "," << format_value(step.omega) << "," << to_string(step.status)
        << "," << format_value(step.h_agg);
    for (double v : step.barrier_values) out << "," << format_value(v);
    for (double v : step.psi_values) out << "," << format_value(v);
    out << "," << format_value(step.tracking_error);
    for (const auto& [name, fn] : scenario.extra_columns) {
      out << "," << format_value(fn(step.state));
    }
    out << "\n";
  }
}

std::string Metrics::to_json() const {
  nlohmann::json j;
  j["variant"] = variant;
  j["mean_tracking_error"] = mean_tracking_error;
  j["max_tracking_error"] = max_tracking_error;
  j["min_h_agg"] = min_h_agg;
  j["min_psi"] = min_psi;
  j["max_input_norm"] = max_input_norm;
  j["non_optimal_steps"] = non_optimal_steps;
  j["wall_time_s"] = wall_time_s;
  return j.dump(2);
}

void export_metrics_json(const std::vector<Metrics>& metrics,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("export_metrics_json: cannot open '" + path + "'");
  }
  out << "[\n";
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    out << metrics[i].to_json();
    if (i + 1 < metrics.size()) out << ",";
    out << "\n";
  }
  out << "]\n";
}

double replay_min_slack(const ScenarioConfig& config, const Scenario& scenario,
                        const SimLog& log) {
  double worst = std::numeric_limits<double>::infinity();
  for (const SimStep& step : log.steps) {
    if (step.status != QpStatus::Optimal) continue;
    const StepEval ev = evaluate_filter(scenario, config, step.state, step.t);
    const QpProblem& prob = ev.filter.problem;
    Eigen::VectorXd z(prob.vars());
    z.head(step.input.size()) = step.input;
    if (prob.has_omega) {
      z[prob.vars() - 1] = step.omega;
    }
    if (prob.rows() > 0) {
      worst = std::min(worst, (prob.d - prob.G * z).minCoeff());
    }
  }
  return worst;
}

}  // namespace ccbf
