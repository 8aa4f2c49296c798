#include "panelfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "panelfm/simulator.hpp"

namespace panelfm {

double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("r_squared: length mismatch");
  if (y_true.size() < 2) throw std::invalid_argument("r_squared: need at least two values");
  const double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) / static_cast<double>(y_true.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  if (ss_tot == 0.0) throw UndefinedMetric("r_squared: y_true is constant");
  return 1.0 - ss_res / ss_tot;
}

SelectionScore selection_score(std::span<const std::size_t> selected, const std::vector<bool>& truth_mask) {
  SelectionScore score;
  std::vector<bool> chosen(truth_mask.size(), false);
  for (auto k : selected) {
    if (k >= truth_mask.size()) throw std::out_of_range("selection_score: index out of range");
    chosen[k] = true;
  }
  for (std::size_t k = 0; k < truth_mask.size(); ++k) {
    if (chosen[k] && !truth_mask[k]) ++score.fp;
    if (!chosen[k] && truth_mask[k]) ++score.fn;
  }
  return score;
}

namespace {

LongitudinalDataset subset(const LongitudinalDataset& ds, const std::vector<std::size_t>& rows) {
  LabelIndex individuals, timepoints;
  std::vector<Record> records;
  records.reserve(rows.size());
  for (auto r : rows) {
    Record rec = ds.records[r];
    rec.individual = individuals.intern(ds.individual_labels.label(rec.individual));
    rec.timepoint = timepoints.intern(ds.timepoint_labels.label(rec.timepoint));
    records.push_back(std::move(rec));
  }
  auto out = LongitudinalDataset::from_records(std::move(records), std::move(individuals),
                                               std::move(timepoints), ds.p);
  out.feature_names = ds.feature_names;
  return out;
}

}  // namespace

TrainTestSplit split_dataset(const LongitudinalDataset& ds, double test_fraction, SplitMode mode,
                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  std::mt19937_64 rng(derive_seed(seed, "split"));
  std::vector<std::size_t> train_rows, test_rows;

  if (mode == SplitMode::WithinIndividual) {
    for (const auto& rows : ds.index_by_individual) {
      std::vector<std::size_t> shuffled = rows;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
      n_test = std::min(n_test, rows.size() - 1);
      test_rows.insert(test_rows.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test));
      train_rows.insert(train_rows.end(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test), shuffled.end());
    }
  } else {
    if (ds.n < 2) throw std::invalid_argument("split by individual needs at least two individuals");
    std::vector<std::size_t> ids(ds.n);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::shuffle(ids.begin(), ids.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.n)));
    n_test = std::clamp<std::size_t>(n_test, 1, ds.n - 1);
    for (std::size_t j = 0; j < ds.n; ++j) {
      auto& dst = j < n_test ? test_rows : train_rows;
      const auto& rows = ds.index_by_individual[ids[j]];
      dst.insert(dst.end(), rows.begin(), rows.end());
    }
  }
  if (test_rows.empty()) throw std::invalid_argument("split produced an empty test set");
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {subset(ds, train_rows), subset(ds, test_rows)};
}

}  // namespace panelfm
