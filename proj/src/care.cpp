#include "ccbf/care.hpp"

#include <sstream>
#include <stdexcept>
#include <unsupported/Eigen/KroneckerProduct>

namespace ccbf {

namespace {

double spectral_abscissa(const Eigen::MatrixXd& A) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(A, false)
      .eigenvalues()
      .real()
      .maxCoeff();
}

// Bass's construction of an initial stabilizing gain: with beta above the
// spectral abscissa of A, solve (A + beta I) X + X (A + beta I)' = 2 B B'
// and take K = B' X^{-1}.
Eigen::MatrixXd bass_initial_gain(const Eigen::MatrixXd& A,
                                  const Eigen::MatrixXd& B) {
  const int n = static_cast<int>(A.rows());
  const double beta = A.norm() + 0.5;
  const Eigen::MatrixXd As = -(A + beta * Eigen::MatrixXd::Identity(n, n));
  // As is Hurwitz; solve As' X' ... via the transposed-form Lyapunov:
  // As X + X As' + 2 B B' = 0  <=>  (As')' X + X (As') + 2BB' = 0 on As'.
  const Eigen::MatrixXd X =
      solve_lyapunov(As.transpose(), 2.0 * B * B.transpose());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(X);
  if (!lu.isInvertible()) {
    throw std::runtime_error(
        "solve_care: Bass initialization failed; (A, B) appears uncontrollable");
  }
  return B.transpose() * lu.inverse();
}

}  // namespace

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A,
                               const Eigen::MatrixXd& C) {
  const int n = static_cast<int>(A.rows());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  // vec(A'X + XA) = (I (x) A' + A' (x) I) vec(X)
  const Eigen::MatrixXd K =
      Eigen::kroneckerProduct(I, A.transpose()).eval() +
      Eigen::kroneckerProduct(A.transpose(), I).eval();
  const Eigen::VectorXd rhs =
      -Eigen::Map<const Eigen::VectorXd>(C.data(), n * n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible()) {
    throw std::runtime_error("solve_lyapunov: singular Kronecker system");
  }
  const Eigen::VectorXd vecX = lu.solve(rhs);
  Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(vecX.data(), n, n);
  return 0.5 * (X + X.transpose());
}

Eigen::MatrixXd solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           double tol, int max_iter) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw std::invalid_argument("solve_care: inconsistent dimensions");
  }
  Eigen::LLT<Eigen::MatrixXd> R_llt(R);
  if (R_llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve_care: R must be positive definite");
  }

  Eigen::MatrixXd K = bass_initial_gain(A, B);
  if (spectral_abscissa(A - B * K) >= 0.0) {
    throw std::runtime_error("solve_care: initial gain is not stabilizing");
  }

  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::MatrixXd Acl = A - B * K;
    const Eigen::MatrixXd P_next =
        solve_lyapunov(Acl, Q + K.transpose() * R * K);
    const double delta = (P_next - P).norm();
    P = P_next;
    K = R_llt.solve(B.transpose() * P);
    if (delta <= tol * std::max(1.0, P.norm())) {
      const double resid = care_residual(A, B, Q, R, P);
      if (resid > 1e-8 * std::max(1.0, P.norm())) {
        std::ostringstream msg;
        msg << "solve_care: converged iterate has residual " << resid;
        throw std::runtime_error(msg.str());
      }
      return P;
    }
  }
  std::ostringstream msg;
  msg << "solve_care: no convergence after " << max_iter
      << " iterations, residual " << care_residual(A, B, Q, R, P);
  throw std::runtime_error(msg.str());
}

double care_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd resid = A.transpose() * P + P * A -
                                P * B * R.llt().solve(B.transpose() * P) + Q;
  return resid.norm();
}

}  // namespace ccbf
