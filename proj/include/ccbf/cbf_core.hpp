#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ccbf {

/// Linear class-K^e decay function alpha(s) = gain * s.
/// Strictly increasing with alpha(0) = 0 for any positive gain.
class ClassKappaE {
public:
  explicit ClassKappaE(double gain = 1.0) : gain_(gain) {
    if (gain <= 0.0) {
      throw std::invalid_argument("ClassKappaE: gain must be positive");
    }
  }

  double operator()(double s) const { return gain_ * s; }
  double gain() const { return gain_; }

private:
  double gain_;
};

/// Positive definite scale for the auxiliary relaxation term: rho(0) = 0,
/// rho(s) > 0 otherwise.
class ScaleFunction {
public:
  enum class Kind { Absolute, Quadratic };

  explicit ScaleFunction(Kind kind = Kind::Absolute) : kind_(kind) {}

  double operator()(double s) const {
    return kind_ == Kind::Absolute ? std::abs(s) : s * s;
  }
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

/// Order-statistic composition spec. The flat form picks the r-th largest of
/// p values; the nested form applies per-group ranks first and an outer rank
/// across the group results.
struct CompositeSpec {
  int rank = 1;

  struct NestedLayer {
    std::vector<int> group_sizes;  // p_{1,j}
    std::vector<int> group_ranks;  // r_{1,j}
    int outer_rank = 1;            // r_2
  };
  std::vector<NestedLayer> nested;  // empty or a single layer

  void validate(int p) const;
};

/// Primitive barrier values/gradients at one state together with their
/// order-statistic composite.
struct BarrierBundle {
  std::vector<double> values;            // h_j(x)
  std::vector<Eigen::VectorXd> gradients;  // grad h_j(x)
  double composite = 0.0;                // r-th largest of values
};

/// r-th largest element of `values` (r = 1 is the maximum, r = p the minimum).
double order_statistic(const std::vector<double>& values, int rank);

/// Evaluate a CompositeSpec over primitive values (flat or nested form).
double composite_value(const std::vector<double>& values,
                       const CompositeSpec& spec);

/// Indices j (0-based) with h_j(x) >= 0.
std::vector<int> active_indices(const std::vector<double>& values);

/// Indices j (0-based) with |h_j(x) - composite| <= tol.
std::vector<int> tight_indices(const std::vector<double>& values,
                               double composite, double tol = 1e-9);

}  // namespace ccbf
