#pragma once

#include "panelfm/dataset.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace panelfm {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Which factor block an operation acts on: individual factors (rows of
// theta_I) or observation/time-point factors (rows of theta_O).
enum class Side { Individual, Observation };

const char* to_string(Side side);

struct HyperPriors {
  double alpha0 = 1.0;  // Gamma shape
  double beta0 = 1.0;   // Gamma rate
  double b_mu0 = 1.0;   // Laplace scale of the location prior
  double b_b0 = 1.0;    // exponential (half-Laplace) scale of the scale prior
  int max_sweeps = 1000;
  double rel_tol = 1e-6;
  double b_floor = 1e-8;  // scales below this are exactly zero

  // Throws std::invalid_argument naming the first bad field.
  void check() const;
};

// All learnable quantities. Latent dimension equals the feature dimension p.
struct ModelParams {
  double alpha = 1.0;
  RowMatrix theta_I;  // n x p
  RowMatrix theta_O;  // m x p
  Eigen::VectorXd mu_I, mu_O;
  Eigen::VectorXd b_I, b_O;

  std::size_t n() const { return static_cast<std::size_t>(theta_I.rows()); }
  std::size_t m() const { return static_cast<std::size_t>(theta_O.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(mu_I.size()); }

  RowMatrix& theta(Side s) { return s == Side::Individual ? theta_I : theta_O; }
  const RowMatrix& theta(Side s) const { return s == Side::Individual ? theta_I : theta_O; }
  Eigen::VectorXd& mu(Side s) { return s == Side::Individual ? mu_I : mu_O; }
  const Eigen::VectorXd& mu(Side s) const { return s == Side::Individual ? mu_I : mu_O; }
  Eigen::VectorXd& b(Side s) { return s == Side::Individual ? b_I : b_O; }
  const Eigen::VectorXd& b(Side s) const { return s == Side::Individual ? b_I : b_O; }

  // Solver starting point: zero factors and locations, unit scales,
  // alpha at the prior mean alpha0 / beta0.
  static ModelParams initial(std::size_t n, std::size_t m, std::size_t p, const HyperPriors& hp);

  // Empty iff alpha > 0, scales non-negative, everything finite, and every
  // zero-scale column sits exactly on its location.
  std::vector<std::string> violations() const;
};

// y_hat = x'(theta_i + theta_o) + theta_i'theta_o
double predict(const ModelParams& params, const Eigen::VectorXd& x, std::size_t individual,
               std::size_t timepoint);
double predict_record(const ModelParams& params, const Record& rec);

// Prior substitution for an individual the model never saw:
// x'(mu_I + theta_o) + theta_o'mu_I.
double predict_unseen_individual(const ModelParams& params, const Eigen::VectorXd& x,
                                 std::size_t timepoint);
double predict_unseen_timepoint(const ModelParams& params, const Eigen::VectorXd& x,
                                std::size_t individual);
// Both sides unseen: x'(mu_I + mu_O) + mu_I'mu_O. This is an extension of
// the single-side rule, not part of the original estimator.
double predict_unseen_both(const ModelParams& params, const Eigen::VectorXd& x);

// Log of the unnormalized joint posterior. A zero-scale column with all
// entries on its location contributes the Laplace term evaluated at scale
// b_floor with zero deviation; a zero-scale column off its location has
// zero density and yields -infinity.
double log_posterior(const ModelParams& params, const HyperPriors& hp,
                     const LongitudinalDataset& ds);

// Per-term pieces of log_posterior, exposed for diagnostics and tests.
struct LogPosteriorTerms {
  double likelihood = 0.0;
  double alpha_prior = 0.0;
  double theta_prior = 0.0;
  double mu_prior = 0.0;
  double b_prior = 0.0;
  double total() const { return likelihood + alpha_prior + theta_prior + mu_prior + b_prior; }
};
LogPosteriorTerms log_posterior_terms(const ModelParams& params, const HyperPriors& hp,
                                      const LongitudinalDataset& ds);

// Log-density of one factor column given its location and scale, with the
// degenerate-scale convention above.
double laplace_column_log_density(const RowMatrix& theta, Eigen::Index k, double mu, double b,
                                  double b_floor);

// A fitted model together with the label maps needed to route new records.
struct Model {
  ModelParams params;
  HyperPriors hyper;
  LabelIndex individuals;
  LabelIndex timepoints;
  std::vector<std::string> feature_names;
  std::uint64_t seed = 0;
};

// How a labeled record was scored, by which of its labels the model knows.
enum class Route { Seen, UnseenIndividual, UnseenTimepoint, UnseenBoth };

const char* to_string(Route route);

struct LabeledPrediction {
  double value = 0.0;
  Route route = Route::Seen;
};

// Picks the seen/unseen rule from label membership in the model's maps.
LabeledPrediction predict_labeled(const Model& model, const std::string& individual,
                                  const std::string& timepoint, const Eigen::VectorXd& x);

std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace panelfm
