#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ccbf/backup_cbf.hpp"
#include "ccbf/cbf_core.hpp"
#include "ccbf/model.hpp"
#include "ccbf/qp_solver.hpp"

namespace ccbf {

enum class FilterVariant {
  Standard,
  Combinatorial,
  GenCombinatorial,
  BackupSingle,
  AggregatedImplicit,
};

const char* to_string(FilterVariant variant);

/// Linear input-set rows A u <= b.
struct InputRows {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  int count() const { return static_cast<int>(A.rows()); }
  bool contains(const Eigen::VectorXd& u, double tol = 1e-9) const {
    return count() == 0 || ((A * u - b).maxCoeff() <= tol);
  }
};

/// Box [-u_max, u_max]^m as input rows.
InputRows box_input_rows(double u_max, int m);

/// Regular polygon inscribed in the 2D ball of radius u_max: rows
/// cos(2 pi i/f) u1 + sin(2 pi i/f) u2 <= u_max cos(pi/f).
InputRows polytope_from_ball(double u_max, int facets = 16);

/// Outcome of one safety-filter solve.
struct FilterResult {
  Eigen::VectorXd u;
  double omega = 0.0;
  QpSolution qp;
  QpProblem problem;  // retained for replay / slack checks

  bool optimal() const { return qp.optimal(); }
};

/// CBF-QP: min ||u - u_des||^2 s.t. hdot_j >= -alpha(h_j), u in U.
FilterResult filter_standard(const ControlAffineModel& model,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u_des,
                             const std::vector<Barrier>& barriers,
                             const ClassKappaE& alpha, const InputRows& input);

/// Combinatorial CBF-QP: rows hdot_j >= -alpha(h + |h_j - h|) with h the
/// order-statistic composite.
FilterResult filter_combinatorial(const ControlAffineModel& model,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u_des,
                                  const std::vector<Barrier>& barriers,
                                  const CompositeSpec& spec,
                                  const ClassKappaE& alpha,
                                  const InputRows& input);

/// Generalized combinatorial CBF-QP over (u, omega):
/// min ||u - u_des||^2 + c_omega omega^2
/// s.t. hdot_j >= -alpha(h_j) - omega rho(h_j - h), omega >= 0, u in U.
FilterResult filter_gen_combinatorial(const ControlAffineModel& model,
                                      const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u_des,
                                      const std::vector<Barrier>& barriers,
                                      const CompositeSpec& spec,
                                      const ClassKappaE& alpha,
                                      const ScaleFunction& rho, double c_omega,
                                      const InputRows& input);

/// Single-backup discretized implicit CBF-QP (no auxiliary variable): rows
/// a'u + b >= -alpha(v) for one policy's ConstraintRows.
FilterResult filter_backup_single(const Eigen::VectorXd& u_des,
                                  const std::vector<ConstraintRow>& rows,
                                  const ClassKappaE& alpha,
                                  const InputRows& input);

/// Aggregated implicit CBF-QP over (u, omega) with per-row gap relaxation.
FilterResult filter_aggregated_implicit(const Eigen::VectorXd& u_des,
                                        const std::vector<ConstraintRow>& rows,
                                        const ClassKappaE& alpha,
                                        double c_omega, const InputRows& input);

}  // namespace ccbf
