#pragma once

#include <Eigen/Dense>
#include <functional>

#include "ccbf/ode_flow.hpp"

namespace ccbf {

/// Scalar constraint function with analytic gradient.
struct Barrier {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

/// Control-affine plant xdot = f(x) + g(x) u with the Jacobians needed to
/// propagate flow sensitivities of closed loops.
struct ControlAffineModel {
  int state_dim = 0;
  int input_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;           // f
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> input_matrix;    // g
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> drift_jacobian;  // Df
  // d/dx [g(x) u] at fixed u; omit for state-independent g.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      input_matrix_jacobian;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> project;  // optional
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::MatrixXd&)>
      project_sensitivity;  // optional, paired with project

  Eigen::VectorXd closed_loop(const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u) const {
    return drift(x) + input_matrix(x) * u;
  }
};

/// Continuously differentiable backup feedback together with the barrier of
/// the set it renders invariant.
struct BackupPolicy {
  int id = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> feedback;  // k_b
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> feedback_jacobian;
  Barrier terminal_barrier;  // h_j
  double gamma = 0.0;        // sublevel scale baked into terminal_barrier
};

/// Closed-loop backup field f + g k_b with its chain-ruled Jacobian.
VectorField backup_field(const ControlAffineModel& model,
                         const BackupPolicy& policy);

}  // namespace ccbf
