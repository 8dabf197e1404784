#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

namespace ccbf {

/// Autonomous vector field with Jacobian and an optional post-step manifold
/// projection (used to keep rotation blocks orthonormal). When a projection
/// is supplied, project_sensitivity must chain its derivative through the
/// flow sensitivity: it receives the pre-projection state and sensitivity
/// and returns the projected sensitivity.
struct VectorField {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> project;  // optional
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::MatrixXd&)>
      project_sensitivity;  // optional
};

/// One sample of a flow: time tau, state phi(tau, x0) and flow sensitivity
/// Q = d phi / d x0.
struct FlowSample {
  double tau = 0.0;
  Eigen::VectorXd state;
  Eigen::MatrixXd sensitivity;
};

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Classical RK4 update of the state only, followed by the field's manifold
/// projection when present.
Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& x,
                         double dt);

/// Integrate the flow over [0, T] with N uniform RK4 steps, propagating the
/// sensitivity Q̇ = Df(phi) Q jointly through the same stages. Returns N+1
/// samples at tau_k = k T/N with Q_0 = I.
std::vector<FlowSample> integrate_flow(const VectorField& field,
                                       const Eigen::VectorXd& x0, double T,
                                       int N);

/// Central-difference approximation of d phi(tau, .)/dx at x0, column by
/// column. Oracle for the variational-equation sensitivity.
Eigen::MatrixXd finite_diff_sensitivity(const VectorField& field,
                                        const Eigen::VectorXd& x0, double tau,
                                        double h_fd = 1e-5, int steps = 64);

}  // namespace ccbf
