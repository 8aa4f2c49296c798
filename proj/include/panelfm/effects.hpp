#pragma once

#include "panelfm/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace panelfm {

enum class CorrelationVerdict { LC, CC, MultiLevel, None };

const char* to_string(CorrelationVerdict v);

// Temporal individual-specific effect: theta_i + theta_o.
Eigen::VectorXd tise(const ModelParams& params, std::size_t individual, std::size_t timepoint);
// The residual term theta_i'theta_o of the linear rewriting of a prediction.
double interaction_offset(const ModelParams& params, std::size_t individual, std::size_t timepoint);
// Averaged individual-specific effect: theta_i + mean over all time points of theta_o.
Eigen::VectorXd aise(const ModelParams& params, std::size_t individual);
// Time-point population-averaged effect: theta_o + mean over all individuals of theta_i.
Eigen::VectorXd tpae(const ModelParams& params, std::size_t timepoint);

struct FixedEffects {
  std::vector<bool> mask;  // b_I[k] == 0 && b_O[k] == 0
  Eigen::VectorXd beta;    // mu_I + mu_O; meaningful where mask is set
};

FixedEffects fixed_effects(const ModelParams& params);

struct EffectsReport {
  std::map<std::pair<std::size_t, std::size_t>, Eigen::VectorXd> tise;
  RowMatrix aise;  // n x p
  RowMatrix tpae;  // m x p
  std::vector<bool> fixed_mask;
  Eigen::VectorXd fixed_effects;
  std::vector<std::size_t> selected;  // ascending
  std::vector<std::size_t> random_I;  // columns carrying individual-level variation
  std::vector<std::size_t> random_O;
  double sparsity_I = 0.0;
  double sparsity_O = 0.0;
  CorrelationVerdict correlation_verdict = CorrelationVerdict::None;
};

struct ReportOptions {
  double threshold = 0.0;  // |beta_k| must exceed this for a fixed effect to count
  // (individual, time point) pairs to emit TISE vectors for.
  std::vector<std::pair<std::size_t, std::size_t>> tise_pairs;
};

// A column is a random effect on a side when its scale is positive and the
// column is not identically zero.
bool is_random_column(const ModelParams& params, Side side, std::size_t k);

EffectsReport selection_report(const ModelParams& params, const ReportOptions& options = {});

std::string report_to_json(const EffectsReport& report, const ModelParams& params,
                           const std::vector<std::string>& feature_names,
                           const LabelIndex& individuals, const LabelIndex& timepoints);
// Flat per-variable table: variable,fixed_mask,beta,b_I,b_O,selected
std::string report_to_csv(const EffectsReport& report, const ModelParams& params,
                          const std::vector<std::string>& feature_names);

}  // namespace panelfm
