#pragma once

#include <Eigen/Dense>

namespace ccbf {

/// Solve the Lyapunov equation A'X + XA + C = 0 by the Kronecker-vectorized
/// direct solve. Requires A to have no eigenvalue pair summing to zero.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& C);

/// Stabilizing solution of the continuous algebraic Riccati equation
///     A'P + PA - P B R^{-1} B' P + Q = 0
/// via Newton-Kleinman iteration. The initial stabilizing gain comes from
/// Bass's construction; (A, B) must be stabilizable.
Eigen::MatrixXd solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           double tol = 1e-12, int max_iter = 60);

/// Frobenius norm of the CARE residual for a candidate P.
double care_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P);

}  // namespace ccbf
