#include "ccbf/qp_filter.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ccbf {

namespace {

// Lie-derivative row data for explicit barriers at x.
struct LieRows {
  std::vector<double> values;      // h_j(x)
  std::vector<double> lf;          // L_f h_j
  std::vector<Eigen::VectorXd> lg; // L_g h_j (m-vectors)
};

LieRows lie_rows(const ControlAffineModel& model, const Eigen::VectorXd& x,
                 const std::vector<Barrier>& barriers) {
  const Eigen::VectorXd f = model.drift(x);
  const Eigen::MatrixXd g = model.input_matrix(x);
  LieRows rows;
  for (const Barrier& h : barriers) {
    const Eigen::VectorXd grad = h.gradient(x);
    rows.values.push_back(h.value(x));
    rows.lf.push_back(grad.dot(f));
    rows.lg.push_back(g.transpose() * grad);
  }
  return rows;
}

// Assemble and solve min ||u - u_des||^2 (+ c_omega w^2) with barrier rows
// -lg'u (- gap w) <= lf + bound and the input rows appended.
FilterResult solve_filter(const Eigen::VectorXd& u_des,
                          const std::vector<Eigen::VectorXd>& lg,
                          const std::vector<double>& lf,
                          const std::vector<double>& bounds,
                          const std::vector<double>* gaps, double c_omega,
                          const InputRows& input) {
  const int m = static_cast<int>(u_des.size());
  const bool with_omega = gaps != nullptr;
  const int z = m + (with_omega ? 1 : 0);
  const int nb = static_cast<int>(lg.size());
  const int extra = with_omega ? 1 : 0;  // omega >= 0 row

  QpProblem prob;
  prob.input_dim = m;
  prob.has_omega = with_omega;
  prob.barrier_rows = nb;
  prob.H = Eigen::MatrixXd::Identity(z, z) * 2.0;
  if (with_omega) {
    prob.H(m, m) = 2.0 * c_omega;
  }
  prob.c = Eigen::VectorXd::Zero(z);
  prob.c.head(m) = -2.0 * u_des;

  prob.G = Eigen::MatrixXd::Zero(nb + extra + input.count(), z);
  prob.d = Eigen::VectorXd::Zero(nb + extra + input.count());
  for (int j = 0; j < nb; ++j) {
    prob.G.row(j).head(m) = -lg[j].transpose();
    if (with_omega) {
      prob.G(j, m) = -(*gaps)[j];
    }
    prob.d[j] = lf[j] + bounds[j];
  }
  if (with_omega) {
    prob.G(nb, m) = -1.0;  // omega >= 0
    prob.d[nb] = 0.0;
  }
  if (input.count() > 0) {
    prob.G.block(nb + extra, 0, input.count(), m) = input.A;
    prob.d.tail(input.count()) = input.b;
  }

  FilterResult res;
  res.qp = solve_qp(prob);
  if (res.qp.z.size() >= m) {
    res.u = res.qp.z.head(m);
  } else {
    res.u = Eigen::VectorXd::Zero(m);
  }
  res.omega = with_omega && res.qp.z.size() == z ? res.qp.z[m] : 0.0;
  res.problem = std::move(prob);
  return res;
}

}  // namespace

const char* to_string(FilterVariant variant) {
  switch (variant) {
    case FilterVariant::Standard: return "cbf";
    case FilterVariant::Combinatorial: return "comb-legacy";
    case FilterVariant::GenCombinatorial: return "comb";
    case FilterVariant::BackupSingle: return "bcbf";
    case FilterVariant::AggregatedImplicit: return "comb-bcbf";
  }
  return "unknown";
}

InputRows box_input_rows(double u_max, int m) {
  InputRows rows;
  rows.A = Eigen::MatrixXd::Zero(2 * m, m);
  rows.b = Eigen::VectorXd::Constant(2 * m, u_max);
  for (int i = 0; i < m; ++i) {
    rows.A(2 * i, i) = 1.0;
    rows.A(2 * i + 1, i) = -1.0;
  }
  return rows;
}

InputRows polytope_from_ball(double u_max, int facets) {
  if (facets < 4 || facets % 2 != 0) {
    throw std::invalid_argument("polytope_from_ball: facets must be even, >= 4");
  }
  InputRows rows;
  rows.A = Eigen::MatrixXd(facets, 2);
  rows.b = Eigen::VectorXd::Constant(facets,
                                     u_max * std::cos(std::numbers::pi / facets));
  for (int i = 0; i < facets; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / facets;
    rows.A(i, 0) = std::cos(angle);
    rows.A(i, 1) = std::sin(angle);
  }
  return rows;
}

FilterResult filter_standard(const ControlAffineModel& model,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u_des,
                             const std::vector<Barrier>& barriers,
                             const ClassKappaE& alpha, const InputRows& input) {
  const LieRows rows = lie_rows(model, x, barriers);
  std::vector<double> bounds;
  bounds.reserve(rows.values.size());
  for (double h : rows.values) {
    bounds.push_back(alpha(h));
  }
  return solve_filter(u_des, rows.lg, rows.lf, bounds, nullptr, 0.0, input);
}

FilterResult filter_combinatorial(const ControlAffineModel& model,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u_des,
                                  const std::vector<Barrier>& barriers,
                                  const CompositeSpec& spec,
                                  const ClassKappaE& alpha,
                                  const InputRows& input) {
  const LieRows rows = lie_rows(model, x, barriers);
  const double h = composite_value(rows.values, spec);
  std::vector<double> bounds;
  bounds.reserve(rows.values.size());
  for (double hj : rows.values) {
    bounds.push_back(alpha(h + std::abs(hj - h)));
  }
  return solve_filter(u_des, rows.lg, rows.lf, bounds, nullptr, 0.0, input);
}

FilterResult filter_gen_combinatorial(const ControlAffineModel& model,
                                      const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u_des,
                                      const std::vector<Barrier>& barriers,
                                      const CompositeSpec& spec,
                                      const ClassKappaE& alpha,
                                      const ScaleFunction& rho, double c_omega,
                                      const InputRows& input) {
  if (c_omega <= 0.0) {
    throw std::invalid_argument("filter_gen_combinatorial: c_omega must be positive");
  }
  const LieRows rows = lie_rows(model, x, barriers);
  const double h = composite_value(rows.values, spec);
  std::vector<double> bounds;
  std::vector<double> gaps;
  bounds.reserve(rows.values.size());
  gaps.reserve(rows.values.size());
  for (double hj : rows.values) {
    bounds.push_back(alpha(hj));
    gaps.push_back(rho(hj - h));
  }
  return solve_filter(u_des, rows.lg, rows.lf, bounds, &gaps, c_omega, input);
}

FilterResult filter_backup_single(const Eigen::VectorXd& u_des,
                                  const std::vector<ConstraintRow>& rows,
                                  const ClassKappaE& alpha,
                                  const InputRows& input) {
  std::vector<Eigen::VectorXd> lg;
  std::vector<double> lf;
  std::vector<double> bounds;
  for (const ConstraintRow& row : rows) {
    lg.push_back(row.u_coeff);
    lf.push_back(row.drift_term);
    bounds.push_back(alpha(row.value));
  }
  return solve_filter(u_des, lg, lf, bounds, nullptr, 0.0, input);
}

FilterResult filter_aggregated_implicit(const Eigen::VectorXd& u_des,
                                        const std::vector<ConstraintRow>& rows,
                                        const ClassKappaE& alpha,
                                        double c_omega, const InputRows& input) {
  if (c_omega <= 0.0) {
    throw std::invalid_argument("filter_aggregated_implicit: c_omega must be positive");
  }
  std::vector<Eigen::VectorXd> lg;
  std::vector<double> lf;
  std::vector<double> bounds;
  std::vector<double> gaps;
  for (const ConstraintRow& row : rows) {
    lg.push_back(row.u_coeff);
    lf.push_back(row.drift_term);
    bounds.push_back(alpha(row.value));
    gaps.push_back(row.gap);
  }
  return solve_filter(u_des, lg, lf, bounds, &gaps, c_omega, input);
}

}  // namespace ccbf
