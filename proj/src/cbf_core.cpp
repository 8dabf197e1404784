#include "ccbf/cbf_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ccbf {

void CompositeSpec::validate(int p) const {
  if (nested.empty()) {
    if (rank < 1 || rank > p) {
      throw std::invalid_argument("CompositeSpec: rank out of range");
    }
    return;
  }
  const NestedLayer& layer = nested.front();
  if (layer.group_sizes.size() != layer.group_ranks.size()) {
    throw std::invalid_argument("CompositeSpec: group size/rank mismatch");
  }
  int total = 0;
  for (std::size_t j = 0; j < layer.group_sizes.size(); ++j) {
    if (layer.group_ranks[j] < 1 || layer.group_ranks[j] > layer.group_sizes[j]) {
      throw std::invalid_argument("CompositeSpec: group rank out of range");
    }
    total += layer.group_sizes[j];
  }
  if (total != p) {
    throw std::invalid_argument("CompositeSpec: group sizes do not cover p");
  }
  const int groups = static_cast<int>(layer.group_sizes.size());
  if (layer.outer_rank < 1 || layer.outer_rank > groups) {
    throw std::invalid_argument("CompositeSpec: outer rank out of range");
  }
}

double order_statistic(const std::vector<double>& values, int rank) {
  const int p = static_cast<int>(values.size());
  if (rank < 1 || rank > p) {
    throw std::invalid_argument("order_statistic: rank out of range");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("order_statistic: non-finite value");
    }
  }
  std::vector<double> sorted(values);
  // r-th largest == element at index r-1 after descending nth_element.
  std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end(),
                   std::greater<double>());
  return sorted[rank - 1];
}

double composite_value(const std::vector<double>& values,
                       const CompositeSpec& spec) {
  spec.validate(static_cast<int>(values.size()));
  if (spec.nested.empty()) {
    return order_statistic(values, spec.rank);
  }
  const CompositeSpec::NestedLayer& layer = spec.nested.front();
  std::vector<double> group_values;
  group_values.reserve(layer.group_sizes.size());
  std::size_t offset = 0;
  for (std::size_t j = 0; j < layer.group_sizes.size(); ++j) {
    const auto size = static_cast<std::size_t>(layer.group_sizes[j]);
    std::vector<double> group(values.begin() + offset,
                              values.begin() + offset + size);
    group_values.push_back(order_statistic(group, layer.group_ranks[j]));
    offset += size;
  }
  return order_statistic(group_values, layer.outer_rank);
}

std::vector<int> active_indices(const std::vector<double>& values) {
  std::vector<int> idx;
  for (int j = 0; j < static_cast<int>(values.size()); ++j) {
    if (values[j] >= 0.0) {
      idx.push_back(j);
    }
  }
  return idx;
}

std::vector<int> tight_indices(const std::vector<double>& values,
                               double composite, double tol) {
  std::vector<int> idx;
  for (int j = 0; j < static_cast<int>(values.size()); ++j) {
    if (std::abs(values[j] - composite) <= tol) {
      idx.push_back(j);
    }
  }
  return idx;
}

}  // namespace ccbf
