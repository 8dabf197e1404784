#include "ccbf/ode_flow.hpp"

namespace ccbf {

namespace {

void check_finite(const Eigen::VectorXd& x, const char* where) {
  if (!x.allFinite()) {
    throw IntegrationError(std::string("integration diverged in ") + where);
  }
}

}  // namespace

Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& x,
                         double dt) {
  if (dt <= 0.0) {
    throw std::invalid_argument("rk4_step: dt must be positive");
  }
  const Eigen::VectorXd k1 = field.eval(x);
  const Eigen::VectorXd k2 = field.eval(x + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = field.eval(x + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = field.eval(x + dt * k3);
  Eigen::VectorXd out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  check_finite(out, "rk4_step");
  if (field.project) {
    out = field.project(out);
  }
  return out;
}

std::vector<FlowSample> integrate_flow(const VectorField& field,
                                       const Eigen::VectorXd& x0, double T,
                                       int N) {
  if (N < 1 || T <= 0.0) {
    throw std::invalid_argument("integrate_flow: need N >= 1 and T > 0");
  }
  const int n = field.dim;
  const double dt = T / N;

  std::vector<FlowSample> samples;
  samples.reserve(N + 1);

  Eigen::VectorXd x = x0;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
  samples.push_back({0.0, x, Q});

  for (int k = 0; k < N; ++k) {
    // Joint RK4 stages for (x, Q); the sensitivity stage derivative is
    // Df(stage state) * stage Q.
    const Eigen::VectorXd k1 = field.eval(x);
    const Eigen::MatrixXd K1 = field.jacobian(x) * Q;

    const Eigen::VectorXd x2 = x + 0.5 * dt * k1;
    const Eigen::VectorXd k2 = field.eval(x2);
    const Eigen::MatrixXd K2 = field.jacobian(x2) * (Q + 0.5 * dt * K1);

    const Eigen::VectorXd x3 = x + 0.5 * dt * k2;
    const Eigen::VectorXd k3 = field.eval(x3);
    const Eigen::MatrixXd K3 = field.jacobian(x3) * (Q + 0.5 * dt * K2);

    const Eigen::VectorXd x4 = x + dt * k3;
    const Eigen::VectorXd k4 = field.eval(x4);
    const Eigen::MatrixXd K4 = field.jacobian(x4) * (Q + dt * K3);

    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Q += (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
    check_finite(x, "integrate_flow");
    if (field.project) {
      if (field.project_sensitivity) {
        Q = field.project_sensitivity(x, Q);
      }
      x = field.project(x);
    }
    samples.push_back({(k + 1) * dt, x, Q});
  }
  return samples;
}

Eigen::MatrixXd finite_diff_sensitivity(const VectorField& field,
                                        const Eigen::VectorXd& x0, double tau,
                                        double h_fd, int steps) {
  if (h_fd <= 0.0) {
    throw std::invalid_argument("finite_diff_sensitivity: h_fd must be positive");
  }
  const int n = field.dim;
  Eigen::MatrixXd J(n, n);
  for (int c = 0; c < n; ++c) {
    Eigen::VectorXd xp = x0;
    Eigen::VectorXd xm = x0;
    xp[c] += h_fd;
    xm[c] -= h_fd;
    const Eigen::VectorXd fp = integrate_flow(field, xp, tau, steps).back().state;
    const Eigen::VectorXd fm = integrate_flow(field, xm, tau, steps).back().state;
    J.col(c) = (fp - fm) / (2.0 * h_fd);
  }
  return J;
}

}  // namespace ccbf
