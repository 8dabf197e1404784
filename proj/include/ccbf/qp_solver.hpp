#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ccbf {

/// Dense strictly convex QP
///     min 1/2 z'Hz + c'z   s.t.  Gz <= d,
/// with decision layout [u (input_dim), omega (optional trailing entry)].
/// Rows [0, barrier_rows) are barrier conditions; the remainder encode the
/// input set. The split only matters to the compatibility/Slater probes,
/// which tighten barrier rows but keep input rows hard.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::MatrixXd G;
  Eigen::VectorXd d;
  int input_dim = 0;
  bool has_omega = false;
  int barrier_rows = 0;

  int vars() const { return static_cast<int>(H.rows()); }
  int rows() const { return static_cast<int>(G.rows()); }
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd multipliers;  // one per row, zero off the active set
  std::vector<int> active_set;
  double kkt_residual = 0.0;
  QpStatus status = QpStatus::MaxIter;
  int iterations = 0;

  bool optimal() const { return status == QpStatus::Optimal; }
};

const char* to_string(QpStatus status);

/// Primal active-set solve. Finds a strictly feasible start through an
/// internal phase-I problem when z = -H^{-1}c is infeasible; reports
/// Infeasible when no point satisfies the rows.
QpSolution solve_qp(const QpProblem& prob, double tol = 1e-10,
                    int max_iter = 200);

}  // namespace ccbf
