#pragma once

#include <span>
#include <vector>

namespace panelfm {

struct WeightedValue {
  double value;
  double weight;
};

// Minimizer of sum_j w_j |v_j - t| in expected linear time (randomized-free
// quickselect with median-of-three pivots over a scratch copy). When the
// minimizer is a whole interval the endpoint closer to zero is returned.
// Weights must be positive and the input non-empty.
double weighted_median(std::vector<WeightedValue> items);

// Conditional mode of a Laplace location: the weighted median of
// `column` (each entry weighted by `entry_weight`) together with a zero
// pseudo-entry weighted by `zero_weight`.
double location_mode(std::span<const double> column, double entry_weight, double zero_weight);

}  // namespace panelfm
