#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ccbf/cbf_core.hpp"
#include "ccbf/model.hpp"
#include "ccbf/qp_filter.hpp"
#include "ccbf/qp_solver.hpp"

namespace ccbf {

inline constexpr double kUnconstrainedMargin =
    std::numeric_limits<double>::infinity();

/// Outcome of a sampled compatibility audit over a region.
struct CompatibilityReport {
  std::string scenario;
  std::string sampler_spec;
  int sampled_states = 0;
  double min_margin = kUnconstrainedMargin;
  Eigen::VectorXd worst_state;
  std::vector<std::pair<Eigen::VectorXd, double>> violations;

  std::string to_json() const;
};

/// Largest uniform slack s with some u in U satisfying
/// L_f h_j + L_g h_j u + alpha(h_j) >= s for every active index j.
/// Positive iff the barriers are conjunctively compatible at x. States with
/// no active index return kUnconstrainedMargin. When `use_tight_indices` is
/// set, the active set is replaced by the indices tight at the composite.
double compatibility_margin(const ControlAffineModel& model,
                            const Eigen::VectorXd& x,
                            const std::vector<Barrier>& barriers,
                            const ClassKappaE& alpha, const InputRows& input,
                            bool use_tight_indices = false,
                            const CompositeSpec& spec = CompositeSpec{});

/// Largest uniform tightening s of the barrier rows of `prob` that keeps the
/// problem feasible (input rows stay hard). Positive iff strictly feasible.
double slater_margin(const QpProblem& prob);

/// Evaluate compatibility_margin over sampled states and aggregate.
CompatibilityReport grid_audit(
    const std::function<std::vector<Eigen::VectorXd>()>& sampler,
    const ControlAffineModel& model, const std::vector<Barrier>& barriers,
    const ClassKappaE& alpha, const InputRows& input,
    const std::string& scenario = {}, const std::string& sampler_spec = {});

}  // namespace ccbf
