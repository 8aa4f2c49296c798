#pragma once

#include "panelfm/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace panelfm {

// R^2 is undefined for a constant target.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// 1 - sum (y - y_hat)^2 / sum (y - mean y)^2
double r_squared(std::span<const double> y_true, std::span<const double> y_pred);

struct SelectionScore {
  double r2 = 0.0;
  std::size_t fp = 0;  // selected but not informative
  std::size_t fn = 0;  // informative but not selected
};

// Fills fp and fn; r2 is left at zero.
SelectionScore selection_score(std::span<const std::size_t> selected, const std::vector<bool>& truth_mask);

enum class SplitMode {
  WithinIndividual,  // hold out records of every individual; all individuals stay seen
  ByIndividual,      // hold out whole individuals; test individuals are unseen
};

struct TrainTestSplit {
  LongitudinalDataset train;
  LongitudinalDataset test;
};

// Deterministic given seed. Within-individual splitting keeps at least one
// training record per individual. Throws std::invalid_argument when the
// requested split leaves the test set empty.
TrainTestSplit split_dataset(const LongitudinalDataset& ds, double test_fraction, SplitMode mode,
                             std::uint64_t seed);

}  // namespace panelfm
