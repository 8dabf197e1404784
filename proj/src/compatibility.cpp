#include "ccbf/compatibility.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace ccbf {

namespace {

constexpr double kRegularization = 1e-8;

// max s over (z, s) with tightened rows g_i'z + s <= d_i, hard rows as-is,
// posed as a strictly convex QP via epsilon regularization.
double max_slack(const Eigen::MatrixXd& G_soft, const Eigen::VectorXd& d_soft,
                 const Eigen::MatrixXd& G_hard, const Eigen::VectorXd& d_hard,
                 int z_dim) {
  const int soft = static_cast<int>(G_soft.rows());
  const int hard = static_cast<int>(G_hard.rows());
  if (soft == 0) {
    return kUnconstrainedMargin;
  }
  QpProblem prob;
  prob.H = Eigen::MatrixXd::Identity(z_dim + 1, z_dim + 1) * (2.0 * kRegularization);
  prob.c = Eigen::VectorXd::Zero(z_dim + 1);
  prob.c[z_dim] = -1.0;
  prob.G = Eigen::MatrixXd::Zero(soft + hard, z_dim + 1);
  prob.d = Eigen::VectorXd(soft + hard);
  prob.G.topLeftCorner(soft, z_dim) = G_soft;
  prob.G.col(z_dim).head(soft).setOnes();
  prob.d.head(soft) = d_soft;
  if (hard > 0) {
    prob.G.bottomLeftCorner(hard, z_dim) = G_hard;
    prob.d.tail(hard) = d_hard;
  }
  const QpSolution sol = solve_qp(prob, 1e-10, 500);
  if (sol.status == QpStatus::MaxIter) {
    throw std::runtime_error("max_slack: slack problem did not converge");
  }
  if (sol.status == QpStatus::Infeasible) {
    // Hard rows alone are infeasible; no slack value exists.
    return -kUnconstrainedMargin;
  }
  return sol.z[z_dim];
}

}  // namespace

double compatibility_margin(const ControlAffineModel& model,
                            const Eigen::VectorXd& x,
                            const std::vector<Barrier>& barriers,
                            const ClassKappaE& alpha, const InputRows& input,
                            bool use_tight_indices, const CompositeSpec& spec) {
  if (input.count() == 0) {
    throw std::invalid_argument("compatibility_margin: empty input set");
  }
  std::vector<double> values;
  values.reserve(barriers.size());
  for (const Barrier& h : barriers) {
    values.push_back(h.value(x));
  }
  std::vector<int> active;
  if (use_tight_indices) {
    active = tight_indices(values, composite_value(values, spec));
  } else {
    active = active_indices(values);
  }
  if (active.empty()) {
    return kUnconstrainedMargin;
  }

  const Eigen::VectorXd f = model.drift(x);
  const Eigen::MatrixXd g = model.input_matrix(x);
  const int m = model.input_dim;

  // Rows: s - L_g h_j u <= L_f h_j + alpha(h_j) for active j.
  Eigen::MatrixXd G_soft(active.size(), m);
  Eigen::VectorXd d_soft(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) {
    const Eigen::VectorXd grad = barriers[active[i]].gradient(x);
    G_soft.row(i) = -(g.transpose() * grad).transpose();
    d_soft[i] = grad.dot(f) + alpha(values[active[i]]);
  }
  return max_slack(G_soft, d_soft, input.A, input.b, m);
}

double slater_margin(const QpProblem& prob) {
  if (prob.rows() == 0) {
    return kUnconstrainedMargin;
  }
  const int nb = prob.barrier_rows;
  return max_slack(prob.G.topRows(nb), prob.d.head(nb),
                   prob.G.bottomRows(prob.rows() - nb),
                   prob.d.tail(prob.rows() - nb), prob.vars());
}

CompatibilityReport grid_audit(
    const std::function<std::vector<Eigen::VectorXd>()>& sampler,
    const ControlAffineModel& model, const std::vector<Barrier>& barriers,
    const ClassKappaE& alpha, const InputRows& input,
    const std::string& scenario, const std::string& sampler_spec) {
  CompatibilityReport report;
  report.scenario = scenario;
  report.sampler_spec = sampler_spec;

  const std::vector<Eigen::VectorXd> states = sampler();
  report.sampled_states = static_cast<int>(states.size());
  for (const Eigen::VectorXd& x : states) {
    const double margin =
        compatibility_margin(model, x, barriers, alpha, input);
    if (margin < report.min_margin) {
      report.min_margin = margin;
      report.worst_state = x;
    }
    if (margin <= 0.0) {
      report.violations.emplace_back(x, margin);
    }
  }
  return report;
}

std::string CompatibilityReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["sampler"] = sampler_spec;
  j["count"] = sampled_states;
  if (std::isfinite(min_margin)) {
    j["min_margin"] = min_margin;
  } else {
    j["min_margin"] = min_margin > 0 ? "inf" : "-inf";
  }
  if (worst_state.size() > 0) {
    j["worst_state"] = std::vector<double>(worst_state.data(),
                                           worst_state.data() + worst_state.size());
  }
  auto& viols = j["violations"] = nlohmann::json::array();
  for (const auto& [state, margin] : violations) {
    nlohmann::json v;
    v["margin"] = margin;
    v["state"] = std::vector<double>(state.data(), state.data() + state.size());
    viols.push_back(std::move(v));
  }
  return j.dump(2);
}

}  // namespace ccbf
