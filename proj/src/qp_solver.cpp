#include "ccbf/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace ccbf {

namespace {

constexpr double kIndependenceTol = 1e-11;

struct ActiveSetResult {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;  // full-length, zero off active
  std::vector<int> working;
  bool converged = false;
  int iterations = 0;
};

// Primal active-set iteration from a feasible start. H is SPD, rows encode
// Gz <= d. Equality subproblems are solved by the null-space method (QR of
// G_W'), which keeps the step exact even for ill-scaled Hessians and yields
// p = 0 identically once the working set fills the variable space.
ActiveSetResult active_set_iterate(const Eigen::MatrixXd& H,
                                   const Eigen::LLT<Eigen::MatrixXd>& llt,
                                   const Eigen::MatrixXd& G,
                                   const Eigen::VectorXd& d,
                                   const Eigen::VectorXd& c,
                                   Eigen::VectorXd z, double tol,
                                   int max_iter) {
  const int n = static_cast<int>(H.rows());
  const int nrows = static_cast<int>(G.rows());
  ActiveSetResult res;
  res.lambda = Eigen::VectorXd::Zero(nrows);
  std::vector<int> working;
  std::vector<char> in_working(nrows, 0);

  auto gather = [&]() {
    Eigen::MatrixXd Gw(working.size(), n);
    for (std::size_t i = 0; i < working.size(); ++i) {
      Gw.row(i) = G.row(working[i]);
    }
    return Gw;
  };

  auto try_add = [&](int row) {
    // Reject rows numerically dependent on the current working set.
    if (!working.empty()) {
      const Eigen::MatrixXd Gw = gather();
      const Eigen::VectorXd coeffs =
          Gw.transpose().colPivHouseholderQr().solve(G.row(row).transpose());
      const double resid =
          (Gw.transpose() * coeffs - G.row(row).transpose()).norm();
      if (resid <= kIndependenceTol * std::max(1.0, G.row(row).norm())) {
        std::cerr << "ccbf::solve_qp: skipping dependent working-set row "
                  << row << "\n";
        return;
      }
    }
    working.push_back(row);
    in_working[row] = 1;
  };

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const Eigen::VectorXd g0 = H * z + c;

    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd lam_w;
    if (working.empty()) {
      p = -llt.solve(g0);
    } else {
      const Eigen::MatrixXd Gw = gather();
      const int nw = static_cast<int>(working.size());
      const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Gw.transpose());
      const Eigen::MatrixXd Q = qr.householderQ();
      const Eigen::MatrixXd R =
          qr.matrixQR().topRows(nw).triangularView<Eigen::Upper>();
      if (nw < n) {
        const Eigen::MatrixXd Z = Q.rightCols(n - nw);
        const Eigen::MatrixXd Hz = Z.transpose() * H * Z;
        const Eigen::VectorXd pz = -Hz.llt().solve(Z.transpose() * g0);
        p = Z * pz;
      }
      // Multipliers from stationarity: G_W' lam = -(g0 + H p).
      const Eigen::VectorXd rhs =
          Q.leftCols(nw).transpose() * (-(g0 + H * p));
      lam_w = R.topLeftCorner(nw, nw)
                  .triangularView<Eigen::Upper>()
                  .solve(rhs);
    }

    if (p.norm() <= tol * std::max(1.0, z.norm())) {
      if (working.empty()) {
        res.converged = true;
        break;
      }
      int drop_pos = -1;
      double min_lam = -tol;
      for (std::size_t i = 0; i < working.size(); ++i) {
        if (lam_w[i] < min_lam) {
          min_lam = lam_w[i];
          drop_pos = static_cast<int>(i);
        }
      }
      if (drop_pos < 0) {
        for (std::size_t i = 0; i < working.size(); ++i) {
          res.lambda[working[i]] = std::max(lam_w[i], 0.0);
        }
        res.converged = true;
        break;
      }
      in_working[working[drop_pos]] = 0;
      working.erase(working.begin() + drop_pos);
      continue;
    }

    // Ratio test over rows outside the working set.
    double alpha = 1.0;
    int blocking = -1;
    const double dir_tol = tol * std::max(1.0, p.norm());
    for (int i = 0; i < nrows; ++i) {
      if (in_working[i]) continue;
      const double dir = G.row(i).dot(p);
      if (dir <= dir_tol) continue;
      const double gap = d[i] - G.row(i).dot(z);
      const double ai = gap / dir;
      if (ai < alpha) {
        alpha = std::max(ai, 0.0);
        blocking = i;
      }
    }
    z += alpha * p;
    if (blocking >= 0) {
      try_add(blocking);
    }
  }

  res.z = std::move(z);
  res.working = std::move(working);
  res.iterations = iter;
  return res;
}

double kkt_residual(const QpProblem& prob, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& lambda) {
  double r = 0.0;
  if (prob.rows() > 0) {
    const Eigen::VectorXd slack = prob.G * z - prob.d;
    r = std::max(r, slack.maxCoeff());                       // primal
    r = std::max(r, -lambda.minCoeff());                     // dual
    r = std::max(r, lambda.cwiseProduct(slack).cwiseAbs().maxCoeff());
    r = std::max(r, (prob.H * z + prob.c + prob.G.transpose() * lambda)
                        .cwiseAbs()
                        .maxCoeff());
  } else {
    r = (prob.H * z + prob.c).cwiseAbs().maxCoeff();
  }
  return std::max(r, 0.0);
}

}  // namespace

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::MaxIter: return "max_iter";
  }
  return "unknown";
}

QpSolution solve_qp(const QpProblem& prob, double tol, int max_iter) {
  const int n = prob.vars();
  const int nrows = prob.rows();
  if (prob.c.size() != n || prob.H.cols() != n) {
    throw std::invalid_argument("solve_qp: inconsistent H/c dimensions");
  }
  if (nrows > 0 && (prob.G.cols() != n || prob.d.size() != nrows)) {
    throw std::invalid_argument("solve_qp: inconsistent G/d dimensions");
  }
  if (nrows > 0 && (!prob.G.allFinite() || !prob.d.allFinite())) {
    throw std::invalid_argument("solve_qp: non-finite constraint data");
  }

  Eigen::LLT<Eigen::MatrixXd> llt(prob.H);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve_qp: H is not positive definite");
  }

  QpSolution sol;
  sol.multipliers = Eigen::VectorXd::Zero(nrows);

  const Eigen::VectorXd z_uc = -llt.solve(prob.c);
  if (nrows == 0) {
    sol.z = z_uc;
    sol.status = QpStatus::Optimal;
    sol.kkt_residual = kkt_residual(prob, sol.z, sol.multipliers);
    return sol;
  }

  Eigen::VectorXd z0 = z_uc;
  if ((prob.G * z0 - prob.d).maxCoeff() > 0.0) {
    // Phase I: maximize the uniform slack s (capped at 1) over (z, s) with
    // rows Gz + s <= d. Start z = 0, s below min(d); the cap keeps the
    // problem bounded and epsilon regularization keeps it strictly convex.
    const double eps = 1e-8;
    QpProblem ph;
    ph.H = Eigen::MatrixXd::Identity(n + 1, n + 1) * (2.0 * eps);
    ph.c = Eigen::VectorXd::Zero(n + 1);
    ph.c[n] = -1.0;
    ph.G = Eigen::MatrixXd::Zero(nrows + 1, n + 1);
    ph.G.topLeftCorner(nrows, n) = prob.G;
    ph.G.col(n).head(nrows).setOnes();
    ph.G(nrows, n) = 1.0;
    ph.d = Eigen::VectorXd(nrows + 1);
    ph.d.head(nrows) = prob.d;
    ph.d[nrows] = 1.0;

    Eigen::VectorXd zs = Eigen::VectorXd::Zero(n + 1);
    zs[n] = std::min(prob.d.minCoeff(), 0.0) - 1.0;

    Eigen::LLT<Eigen::MatrixXd> llt_ph(ph.H);
    ActiveSetResult ph_res = active_set_iterate(ph.H, llt_ph, ph.G, ph.d, ph.c,
                                                zs, tol, max_iter);
    if (!ph_res.converged) {
      sol.z = Eigen::VectorXd::Zero(n);
      sol.status = QpStatus::MaxIter;
      sol.iterations = ph_res.iterations;
      return sol;
    }
    if (ph_res.z[n] <= tol) {
      sol.z = ph_res.z.head(n);
      sol.status = QpStatus::Infeasible;
      sol.iterations = ph_res.iterations;
      return sol;
    }
    z0 = ph_res.z.head(n);
  }

  ActiveSetResult res = active_set_iterate(prob.H, llt, prob.G, prob.d,
                                           prob.c, z0, tol, max_iter);
  sol.z = res.z;
  sol.multipliers = res.lambda;
  sol.active_set = res.working;
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.iterations = res.iterations;
  sol.status = res.converged ? QpStatus::Optimal : QpStatus::MaxIter;
  sol.kkt_residual = kkt_residual(prob, sol.z, sol.multipliers);
  return sol;
}

}  // namespace ccbf
