#include <CLI11.hpp>
#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "ccbf/care.hpp"
#include "ccbf/harness.hpp"
#include "ccbf/testing/oracles.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitSafety = 4;
constexpr double kSafetyTol = 1e-3;

ccbf::ScenarioConfig make_config(const std::string& config_path,
                                 const std::string& scenario,
                                 const std::string& variant,
                                 std::uint64_t seed, bool has_seed) {
  ccbf::ScenarioConfig cfg;
  if (!config_path.empty()) {
    cfg = ccbf::load_config_file(config_path);
  }
  if (!scenario.empty()) cfg.scenario = scenario;
  if (!variant.empty()) cfg.variant = ccbf::parse_variant(variant);
  if (has_seed) cfg.seed = seed;
  return cfg;
}

void print_metrics(const ccbf::Metrics& m) {
  std::cout << "variant=" << m.variant
            << " mean_track_err=" << m.mean_tracking_error
            << " max_track_err=" << m.max_tracking_error
            << " min_h_agg=" << m.min_h_agg << " min_psi=[";
  for (std::size_t i = 0; i < m.min_psi.size(); ++i) {
    std::cout << (i ? "," : "") << m.min_psi[i];
  }
  std::cout << "] max_u=" << m.max_input_norm
            << " non_optimal=" << m.non_optimal_steps
            << " wall_s=" << m.wall_time_s << "\n";
}

int exit_code_for(const ccbf::Metrics& m) {
  for (double v : m.min_psi) {
    if (v < -kSafetyTol) return kExitSafety;
  }
  return kExitOk;
}

int run_command(const ccbf::ScenarioConfig& cfg, const std::string& out_dir) {
  const ccbf::Scenario sc = ccbf::build_scenario(cfg);
  const ccbf::SimLog log = ccbf::run_closed_loop(cfg, sc);
  std::filesystem::create_directories(out_dir);
  const std::string base = out_dir + "/" + cfg.scenario + "_" +
                           ccbf::to_string(cfg.variant);
  ccbf::export_csv(log, sc, base + ".csv");
  ccbf::export_metrics_json({log.metrics}, base + "_metrics.json");
  print_metrics(log.metrics);
  std::cout << "log: " << base << ".csv\n";
  const int safety = exit_code_for(log.metrics);
  if (safety != kExitOk) return safety;
  for (const ccbf::SimStep& step : log.steps) {
    if (step.status == ccbf::QpStatus::MaxIter) return kExitSolver;
  }
  return kExitOk;
}

int compare_command(const ccbf::ScenarioConfig& cfg, const std::string& out_dir) {
  const std::vector<ccbf::FilterVariant> variants = {
      ccbf::FilterVariant::Standard, ccbf::FilterVariant::GenCombinatorial,
      ccbf::FilterVariant::BackupSingle,
      ccbf::FilterVariant::AggregatedImplicit};
  std::filesystem::create_directories(out_dir);
  std::vector<ccbf::Metrics> table;
  for (ccbf::FilterVariant v : variants) {
    ccbf::ScenarioConfig run_cfg = cfg;
    run_cfg.variant = v;
    const ccbf::Scenario sc = ccbf::build_scenario(run_cfg);
    const ccbf::SimLog log = ccbf::run_closed_loop(run_cfg, sc);
    ccbf::export_csv(log, sc,
                     out_dir + "/" + cfg.scenario + "_" +
                         ccbf::to_string(v) + ".csv");
    table.push_back(log.metrics);
    print_metrics(log.metrics);
  }
  ccbf::export_metrics_json(table, out_dir + "/" + cfg.scenario +
                                       "_compare_metrics.json");
  int code = kExitOk;
  for (const ccbf::Metrics& m : table) {
    code = std::max(code, exit_code_for(m));
  }
  return code;
}

bool parse_res(const std::string& res, int& w, int& h) {
  const auto x = res.find('x');
  if (x == std::string::npos) return false;
  try {
    w = std::stoi(res.substr(0, x));
    h = std::stoi(res.substr(x + 1));
  } catch (...) {
    return false;
  }
  return w >= 1 && h >= 1;
}

bool parse_slice(const std::string& slice, std::array<double, 4>& range) {
  if (slice.empty()) return true;
  const auto comma = slice.find(',');
  if (comma == std::string::npos) return false;
  auto parse_pair = [](const std::string& s, double& lo, double& hi) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) return false;
    try {
      lo = std::stod(s.substr(0, colon));
      hi = std::stod(s.substr(colon + 1));
    } catch (...) {
      return false;
    }
    return true;
  };
  return parse_pair(slice.substr(0, comma), range[0], range[1]) &&
         parse_pair(slice.substr(comma + 1), range[2], range[3]);
}

int grid_command(const ccbf::ScenarioConfig& cfg, const std::string& slice,
                 const std::string& res, const std::string& out_file) {
  const ccbf::Scenario sc = ccbf::build_scenario(cfg);
  std::array<double, 4> range = sc.grid_range;
  int w = 64, h = 64;
  if (!parse_res(res, w, h) || !parse_slice(slice, range)) {
    std::cerr << "grid: bad --res or --slice\n";
    return kExitConfig;
  }
  ccbf::export_grid(cfg, sc, w, h, range, out_file);
  std::cout << "grid: " << out_file << " (" << w << "x" << h << ")\n";
  return kExitOk;
}

int audit_command(const ccbf::ScenarioConfig& cfg, int samples,
                  const std::string& out_file) {
  const ccbf::Scenario sc = ccbf::build_scenario(cfg);
  std::mt19937_64 rng(cfg.seed);

  // Sample the union of the backup sets (the C_max hypothesis region).
  auto sampler = [&]() {
    std::vector<Eigen::VectorXd> states;
    std::uniform_int_distribution<int> pick(
        0, static_cast<int>(sc.policies.size()) - 1);
    for (int i = 0; i < samples; ++i) {
      const int j = pick(rng);
      if (cfg.scenario == "orbit") {
        const auto radii = ccbf::orbit::backup_radii_nd(cfg.orbit);
        const Eigen::Matrix3d P =
            ccbf::solve_care(ccbf::orbit::care_A(), ccbf::orbit::care_B(),
                             Eigen::Matrix3d::Identity(),
                             Eigen::Matrix2d::Identity());
        states.push_back(ccbf::orbit::sample_backup_set(
            ccbf::orbit::reduced_equilibrium(radii[j]), P, cfg.orbit.gamma,
            rng));
      } else {
        const auto targets = ccbf::attitude::backup_targets(cfg.attitude);
        states.push_back(ccbf::attitude::sample_backup_set(
            cfg.attitude, targets[j], sc.policies[j].gamma, rng));
      }
    }
    return states;
  };

  const ccbf::CompatibilityReport report = ccbf::grid_audit(
      sampler, sc.model, sc.barrier_set(), ccbf::ClassKappaE(cfg.alpha_gain),
      sc.input, cfg.scenario,
      "union of backup sets, " + std::to_string(samples) + " samples");
  std::cout << report.to_json() << "\n";
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    out << report.to_json() << "\n";
    std::cout << "report: " << out_file << "\n";
  }
  if (!report.violations.empty()) {
    std::cout << "note: " << report.violations.size()
              << " states with non-positive margin at this resolution\n";
  }
  return kExitOk;
}

struct SelfTest {
  int failures = 0;
  void check(const std::string& name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    if (!ok) ++failures;
  }
};

int selftest_command() {
  using namespace ccbf;
  SelfTest st;

  {  // order statistic vs full sort
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> len(1, 20);
    std::normal_distribution<double> gauss;
    bool ok = true;
    for (int i = 0; i < 2000 && ok; ++i) {
      std::vector<double> v(len(rng));
      for (double& x : v) x = gauss(rng);
      std::uniform_int_distribution<int> rank(1, static_cast<int>(v.size()));
      const int r = rank(rng);
      ok = order_statistic(v, r) == testing::sort_order_statistic(v, r);
    }
    st.check("order_statistic matches sort oracle", ok);
  }
  {  // scalar exponential decay
    VectorField field;
    field.dim = 1;
    field.eval = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(-x); };
    field.jacobian = [](const Eigen::VectorXd&) {
      return Eigen::MatrixXd::Constant(1, 1, -1.0);
    };
    const auto samples = integrate_flow(field, Eigen::VectorXd::Ones(1), 1.0, 100);
    st.check("integrate_flow matches exp(-1)",
             std::abs(samples.back().state[0] - std::exp(-1.0)) < 1e-8 &&
                 std::abs(samples.back().sensitivity(0, 0) - std::exp(-1.0)) <
                     1e-8);
  }
  {  // linear field sensitivity vs matrix exponential
    Eigen::Matrix3d A;
    A << -0.8, 0.4, 0.0, -0.3, -1.1, 0.5, 0.1, -0.2, -0.6;
    VectorField field;
    field.dim = 3;
    field.eval = [A](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x); };
    field.jacobian = [A](const Eigen::VectorXd&) { return Eigen::MatrixXd(A); };
    const auto samples =
        integrate_flow(field, Eigen::Vector3d(1.0, -0.5, 0.25), 2.0, 200);
    const Eigen::Matrix3d expAT = (A * 2.0).exp();
    st.check("flow sensitivity matches matrix exponential",
             (samples.back().sensitivity - expAT).norm() < 1e-6);
  }
  {  // QP KKT + dual oracle
    std::mt19937_64 rng(8);
    bool ok = true;
    for (int i = 0; i < 50 && ok; ++i) {
      const QpProblem prob = testing::random_feasible_qp(rng);
      const QpSolution sol = solve_qp(prob);
      ok = sol.optimal() && sol.kkt_residual <= 1e-8;
      if (ok) {
        const auto oracle =
            testing::dual_projected_gradient(prob.H, prob.c, prob.G, prob.d);
        const double obj = 0.5 * sol.z.dot(prob.H * sol.z) + prob.c.dot(sol.z);
        ok = oracle.converged && std::abs(obj - oracle.objective) <= 1e-6;
      }
    }
    st.check("solve_qp passes KKT and dual-oracle checks", ok);
  }
  {  // CARE cases
    bool ok = true;
    const Eigen::MatrixXd P1 = solve_care(
        Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Ones(1, 1),
        Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
    ok = ok && std::abs(P1(0, 0) - 1.0) < 1e-10;
    const Eigen::MatrixXd P = solve_care(orbit::care_A(), orbit::care_B(),
                                         Eigen::Matrix3d::Identity(),
                                         Eigen::Matrix2d::Identity());
    ok = ok && care_residual(orbit::care_A(), orbit::care_B(),
                             Eigen::Matrix3d::Identity(),
                             Eigen::Matrix2d::Identity(), P) < 1e-8;
    st.check("CARE scalar and reduced-pair cases", ok);
  }
  {  // scenario field sensitivities vs finite differences
    std::mt19937_64 rng(9);
    bool ok = true;
    const Scenario sc = orbit::make_scenario();
    std::normal_distribution<double> gauss;
    for (int i = 0; i < 3 && ok; ++i) {
      Eigen::VectorXd x = sc.initial_state;
      x[0] += 0.1 * gauss(rng);
      x[2] += 0.05 * gauss(rng);
      x[3] += 0.02 * gauss(rng);
      const VectorField field = backup_field(sc.model, sc.policies[i]);
      const auto flow = integrate_flow(field, x, sc.horizon.T, sc.horizon.N);
      const Eigen::MatrixXd fd =
          finite_diff_sensitivity(field, x, sc.horizon.T, 1e-5, sc.horizon.N);
      ok = (flow.back().sensitivity - fd).norm() / std::max(1.0, fd.norm()) <=
           1e-4;
    }
    st.check("orbit backup flow sensitivity matches finite differences", ok);
  }

  std::cout << (st.failures == 0 ? "selftest: all checks passed\n"
                                 : "selftest: FAILURES\n");
  return st.failures == 0 ? kExitOk : kExitSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Combinatorial CBF safety-filter simulations"};
  app.require_subcommand(1);

  std::string scenario, variant, config_path, out_dir = "out";
  std::string slice, res = "64x64", out_file;
  std::uint64_t seed = 0;
  int samples = 1000;

  auto add_common = [&](CLI::App* cmd, bool with_variant) {
    cmd->add_option("--scenario", scenario, "attitude|orbit");
    if (with_variant) {
      cmd->add_option("--variant", variant, "cbf|comb|bcbf|comb-bcbf");
    }
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "RNG seed override");
  };

  CLI::App* run = app.add_subcommand("run", "closed-loop simulation");
  add_common(run, true);
  run->add_option("--out", out_dir, "output directory");

  CLI::App* compare = app.add_subcommand("compare", "all four variants");
  add_common(compare, false);
  compare->add_option("--out", out_dir, "output directory");

  CLI::App* grid = app.add_subcommand("grid", "barrier raster over a slice");
  add_common(grid, false);
  grid->add_option("--slice", slice, "a0:a1,b0:b1 parameter ranges");
  grid->add_option("--res", res, "WxH resolution");
  grid->add_option("--out", out_file, "output file")->required();

  CLI::App* audit = app.add_subcommand("audit", "compatibility audit");
  add_common(audit, false);
  audit->add_option("--samples", samples, "number of sampled states");
  audit->add_option("--out", out_file, "JSON report file");

  app.add_subcommand("selftest", "run built-in oracle checks");

  CLI11_PARSE(app, argc, argv);

  try {
    const bool has_seed = app.count_all() && (run->count("--seed") ||
                                              compare->count("--seed") ||
                                              grid->count("--seed") ||
                                              audit->count("--seed"));
    if (app.got_subcommand("selftest")) {
      return selftest_command();
    }
    const ccbf::ScenarioConfig cfg =
        make_config(config_path, scenario, variant, seed, has_seed);
    if (app.got_subcommand(run)) {
      return run_command(cfg, out_dir);
    }
    if (app.got_subcommand(compare)) {
      return compare_command(cfg, out_dir);
    }
    if (app.got_subcommand(grid)) {
      return grid_command(cfg, slice, res, out_file);
    }
    if (app.got_subcommand(audit)) {
      return audit_command(cfg, samples, out_file);
    }
  } catch (const ccbf::ConfigError& err) {
    std::cerr << err.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}
