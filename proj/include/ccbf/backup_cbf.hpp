#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ccbf/cbf_core.hpp"
#include "ccbf/model.hpp"

namespace ccbf {

/// Discretization horizon for the backup flow: constraints at tau_k = k T/N
/// for k = 1..N plus the terminal set condition. The tau_0 sample can be
/// included for a more conservative set, but with relative-degree-two safety
/// functions its row has no input coefficient and can render the QP
/// infeasible, so it stays off by default.
struct Horizon {
  double T = 1.0;
  int N = 10;
  bool include_tau0 = false;
};

/// Implicit-CBF evaluation for one backup policy at one state. Trajectory
/// entries are ordered sample-major: for each tau_k (k = 0..N) one value per
/// safety constraint.
struct ImplicitCbfEval {
  int policy_id = 0;
  std::vector<double> traj_values;               // psi_i(phi(tau_k, x))
  std::vector<Eigen::VectorXd> traj_gradients;   // grad of psi_i o phi(tau_k, .)
  double terminal_value = 0.0;                   // h_j(phi(T, x))
  Eigen::VectorXd terminal_gradient;             // grad of h_j o phi(T, .)
  double implicit_value = 0.0;                   // h_I^fin for this policy
  std::vector<FlowSample> flow;                  // retained for diagnostics
};

/// One linear row of the aggregated implicit QP:
///     u_coeff' u + drift_term >= -alpha(value) - omega * gap.
struct ConstraintRow {
  Eigen::VectorXd u_coeff;  // grad' g(x)
  double drift_term = 0.0;  // grad' f(x)
  double value = 0.0;       // the row's own barrier value
  double gap = 0.0;         // rho(value - h_agg)
};

/// Integrate the backup flow of `policy` from x and evaluate every safety
/// constraint plus the terminal barrier along it, with pullback gradients
/// grad(psi o phi)(x) = Q_k' grad psi(phi_k).
ImplicitCbfEval eval_implicit_cbf(const ControlAffineModel& model,
                                  const BackupPolicy& policy,
                                  const std::vector<Barrier>& safety,
                                  const Eigen::VectorXd& x,
                                  const Horizon& horizon);

/// h_agg^fin = max_j h_I^fin_j.
double aggregated_value(const std::vector<ImplicitCbfEval>& evals);

/// Assemble the trajectory-level rows for all policies: one row per
/// (policy, sample, safety constraint) plus one terminal row per policy.
std::vector<ConstraintRow> assemble_implicit_constraints(
    const std::vector<ImplicitCbfEval>& evals, double h_agg,
    const ScaleFunction& rho, const ControlAffineModel& model,
    const Eigen::VectorXd& x);

/// Membership in the aggregated implicit safe set with its margin.
std::pair<bool, double> membership(const std::vector<ImplicitCbfEval>& evals);

}  // namespace ccbf
