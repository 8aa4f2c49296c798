#include "panelfm/weighted_median.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace panelfm {

namespace {

double median_of_three(double a, double b, double c) {
  return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

}  // namespace

double weighted_median(std::vector<WeightedValue> items) {
  if (items.empty()) throw std::invalid_argument("weighted_median: empty input");
  double total = 0.0;
  for (const auto& it : items) {
    if (!(it.weight > 0.0)) throw std::invalid_argument("weighted_median: weights must be positive");
    total += it.weight;
  }
  const double half = 0.5 * total;
  const double tie_tol = 1e-12 * total;

  std::size_t lo = 0;
  std::size_t hi = items.size();
  double below = 0.0;  // weight of everything left of [lo, hi)
  // Largest value discarded to the left and smallest discarded to the right.
  double below_max = -std::numeric_limits<double>::infinity();
  double above_min = std::numeric_limits<double>::infinity();
  while (true) {
    const std::size_t len = hi - lo;
    const double pivot = median_of_three(items[lo].value, items[lo + len / 2].value, items[hi - 1].value);

    // Three-way partition of [lo, hi) into < pivot, == pivot, > pivot.
    std::size_t lt = lo, i = lo, gt = hi;
    double w_less = 0.0, w_equal = 0.0;
    while (i < gt) {
      if (items[i].value < pivot) {
        w_less += items[i].weight;
        std::swap(items[lt++], items[i++]);
      } else if (items[i].value > pivot) {
        std::swap(items[i], items[--gt]);
      } else {
        w_equal += items[i].weight;
        ++i;
      }
    }

    if (below + w_less >= half + tie_tol && lt > lo) {
      hi = lt;
      above_min = pivot;
      continue;
    }
    const double through_pivot = below + w_less + w_equal;
    if (through_pivot < half - tie_tol) {
      below = through_pivot;
      lo = gt;
      below_max = pivot;
      continue;
    }
    if (std::abs(below + w_less - half) <= tie_tol) {
      // Weight balances exactly at the pivot's lower side: the minimizers
      // form [largest value below the pivot, pivot].
      double left = below_max;
      for (std::size_t j = lo; j < lt; ++j) left = std::max(left, items[j].value);
      if (std::isfinite(left)) return std::abs(left) <= std::abs(pivot) ? left : pivot;
    }
    if (std::abs(through_pivot - half) <= tie_tol) {
      double right = above_min;
      for (std::size_t j = gt; j < hi; ++j) right = std::min(right, items[j].value);
      if (std::isfinite(right)) return std::abs(pivot) <= std::abs(right) ? pivot : right;
    }
    return pivot;
  }
}

double location_mode(std::span<const double> column, double entry_weight, double zero_weight) {
  std::vector<WeightedValue> items;
  items.reserve(column.size() + 1);
  for (double v : column) items.push_back({v, entry_weight});
  items.push_back({0.0, zero_weight});
  return weighted_median(std::move(items));
}

}  // namespace panelfm
