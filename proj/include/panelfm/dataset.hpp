#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace panelfm {

// Raised for malformed input files and invariant violations found while
// building a dataset. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Record {
  std::size_t individual = 0;
  std::size_t timepoint = 0;
  Eigen::VectorXd features;
  double outcome = 0.0;
};

// Dense label <-> index mapping. Labels keep first-appearance order.
class LabelIndex {
 public:
  std::size_t intern(const std::string& label);
  std::optional<std::size_t> find(const std::string& label) const;
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  static LabelIndex from_labels(std::vector<std::string> labels);

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Unbalanced longitudinal panel. Time points are shared across individuals,
// so two individuals measured at the same wave share one observation factor.
struct LongitudinalDataset {
  std::size_t n = 0;  // individuals
  std::size_t m = 0;  // time points
  std::size_t p = 0;  // features
  std::vector<Record> records;
  std::vector<std::vector<std::size_t>> index_by_individual;
  std::vector<std::vector<std::size_t>> index_by_timepoint;
  LabelIndex individual_labels;
  LabelIndex timepoint_labels;
  std::vector<std::string> feature_names;  // x1..xp unless read from a file

  std::size_t size() const { return records.size(); }

  // Recomputes both index maps from `records`. Out-of-range indices are
  // skipped here and reported by validate().
  void rebuild_index();

  // Builds a dataset and throws DataError if any invariant fails.
  static LongitudinalDataset from_records(std::vector<Record> records,
                                          LabelIndex individuals,
                                          LabelIndex timepoints,
                                          std::size_t p);
};

// One entry per invariant violation; empty iff the dataset is valid.
std::vector<std::string> validate(const LongitudinalDataset& ds);

// A single parsed CSV row before labels are resolved to indices.
struct RawRow {
  std::string id;
  std::string time;
  double y = 0.0;
  Eigen::VectorXd x;
  std::size_t line = 0;
};

struct RawTable {
  std::vector<std::string> feature_names;
  std::vector<RawRow> rows;
};

// Long-format CSV: header `id,time,y,x1,...,xp`.
RawTable read_long_csv(std::istream& in, const std::string& source = "<stream>");
RawTable read_long_csv(const std::filesystem::path& path);

LongitudinalDataset load_dataset(const std::filesystem::path& path);
LongitudinalDataset dataset_from_table(const RawTable& table);

void write_long_csv(std::ostream& out, const LongitudinalDataset& ds);
void write_long_csv(const std::filesystem::path& path, const LongitudinalDataset& ds);

}  // namespace panelfm
