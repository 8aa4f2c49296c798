#pragma once

#include "panelfm/dataset.hpp"
#include "panelfm/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace panelfm {

enum class Correlation { LC, CC, Multi };

const char* to_string(Correlation c);
// Accepts lc, cc, multi (case-insensitive); throws std::invalid_argument.
Correlation parse_correlation(const std::string& token);

struct SimConfig {
  std::size_t n = 40;
  std::size_t m = 40;
  std::size_t p = 100;
  std::size_t n_fixed = 5;
  std::size_t n_random = 5;
  Correlation correlation = Correlation::Multi;
  double noise_sd = 0.5;
  double effect_scale = 1.0;
  double random_effect_sd = 1.0;
  // Probability that each (individual, time point) record is kept. 1 gives a
  // balanced panel; every individual always keeps at least one record.
  double keep_probability = 1.0;
  // AR(1) coefficient of each covariate across consecutive time points of an
  // individual. 0 gives i.i.d. standard normal covariates.
  double covariate_ar = 0.0;
  // Multi-level layout. By default the random columns are divided between
  // the two levels (the first ceil(n_random / 2) vary by individual, the
  // rest by time point). When shared, every random column varies on both.
  bool shared_random_columns = false;
  std::uint64_t seed = 1;

  void check() const;
};

struct SimTruth {
  Eigen::VectorXd beta_true;
  RowMatrix gamma_I_true;  // n x p
  RowMatrix gamma_O_true;  // m x p
  std::vector<bool> informative_mask;
  std::vector<bool> random_mask;
};

struct Simulation {
  LongitudinalDataset data;
  SimTruth truth;
};

Simulation generate(const SimConfig& cfg);

std::string truth_to_json(const SimTruth& truth);
SimTruth truth_from_json(const std::string& text);
void save_truth(const std::filesystem::path& path, const SimTruth& truth);
SimTruth load_truth(const std::filesystem::path& path);

// Independent random sub-stream derived from a master seed and a stream name
// ("data", "cv-folds", ...).
std::uint64_t derive_seed(std::uint64_t master, const std::string& stream);

}  // namespace panelfm
