#include "ccbf/backup_cbf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ccbf {

VectorField backup_field(const ControlAffineModel& model,
                         const BackupPolicy& policy) {
  VectorField field;
  field.dim = model.state_dim;
  field.eval = [model, policy](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return model.drift(x) + model.input_matrix(x) * policy.feedback(x);
  };
  field.jacobian = [model, policy](const Eigen::VectorXd& x) {
    Eigen::MatrixXd J = model.drift_jacobian(x) +
                        model.input_matrix(x) * policy.feedback_jacobian(x);
    if (model.input_matrix_jacobian) {
      J += model.input_matrix_jacobian(x, policy.feedback(x));
    }
    return J;
  };
  field.project = model.project;
  field.project_sensitivity = model.project_sensitivity;
  return field;
}

ImplicitCbfEval eval_implicit_cbf(const ControlAffineModel& model,
                                  const BackupPolicy& policy,
                                  const std::vector<Barrier>& safety,
                                  const Eigen::VectorXd& x,
                                  const Horizon& horizon) {
  if (safety.empty()) {
    throw std::invalid_argument("eval_implicit_cbf: no safety constraints");
  }
  const VectorField field = backup_field(model, policy);

  ImplicitCbfEval eval;
  eval.policy_id = policy.id;
  eval.flow = integrate_flow(field, x, horizon.T, horizon.N);

  double min_value = std::numeric_limits<double>::infinity();
  const std::size_t k_first = horizon.include_tau0 ? 0 : 1;
  for (std::size_t k = k_first; k < eval.flow.size(); ++k) {
    const FlowSample& sample = eval.flow[k];
    for (const Barrier& psi : safety) {
      const double v = psi.value(sample.state);
      if (!std::isfinite(v)) {
        throw std::runtime_error("eval_implicit_cbf: non-finite barrier value");
      }
      eval.traj_values.push_back(v);
      eval.traj_gradients.push_back(sample.sensitivity.transpose() *
                                    psi.gradient(sample.state));
      min_value = std::min(min_value, v);
    }
  }

  const FlowSample& last = eval.flow.back();
  eval.terminal_value = policy.terminal_barrier.value(last.state);
  eval.terminal_gradient =
      last.sensitivity.transpose() * policy.terminal_barrier.gradient(last.state);
  eval.implicit_value = std::min(min_value, eval.terminal_value);
  return eval;
}

double aggregated_value(const std::vector<ImplicitCbfEval>& evals) {
  if (evals.empty()) {
    throw std::invalid_argument("aggregated_value: empty evaluation list");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const ImplicitCbfEval& e : evals) {
    best = std::max(best, e.implicit_value);
  }
  return best;
}

std::vector<ConstraintRow> assemble_implicit_constraints(
    const std::vector<ImplicitCbfEval>& evals, double h_agg,
    const ScaleFunction& rho, const ControlAffineModel& model,
    const Eigen::VectorXd& x) {
  const Eigen::VectorXd f = model.drift(x);
  const Eigen::MatrixXd g = model.input_matrix(x);

  std::vector<ConstraintRow> rows;
  for (const ImplicitCbfEval& eval : evals) {
    for (std::size_t i = 0; i < eval.traj_values.size(); ++i) {
      ConstraintRow row;
      row.u_coeff = g.transpose() * eval.traj_gradients[i];
      row.drift_term = eval.traj_gradients[i].dot(f);
      row.value = eval.traj_values[i];
      row.gap = rho(row.value - h_agg);
      rows.push_back(std::move(row));
    }
    ConstraintRow terminal;
    terminal.u_coeff = g.transpose() * eval.terminal_gradient;
    terminal.drift_term = eval.terminal_gradient.dot(f);
    terminal.value = eval.terminal_value;
    terminal.gap = rho(terminal.value - h_agg);
    rows.push_back(std::move(terminal));
  }
  return rows;
}

std::pair<bool, double> membership(const std::vector<ImplicitCbfEval>& evals) {
  const double h_agg = aggregated_value(evals);
  return {h_agg >= 0.0, h_agg};
}

}  // namespace ccbf
