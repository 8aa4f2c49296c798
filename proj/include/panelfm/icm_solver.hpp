#pragma once

#include "panelfm/dataset.hpp"
#include "panelfm/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace panelfm {

// The monitored log-posterior decreased: an update is not a conditional
// mode. Indicates a solver bug. CLI exit code 4.
class AscentViolation : public std::runtime_error {
 public:
  AscentViolation(std::string block, double before, double after);
  const std::string& block() const { return block_; }
  double before() const { return before_; }
  double after() const { return after_; }

 private:
  std::string block_;
  double before_;
  double after_;
};

// A NaN or infinity appeared inside a block update.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& block)
      : std::runtime_error("non-finite value produced in block " + block), block_(block) {}
  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

struct FitState {
  ModelParams params;
  Eigen::VectorXd residuals;  // y - y_hat per record
  int sweep_count = 0;
  std::vector<double> log_posterior_trace;  // entry 0 is the starting point
};

// Linear form of the predictions of one entity's records in its own factor:
// y_hat = g + h * theta_e, where h = X_e + (counterpart factors) and
// g = rowwise x . (counterpart factor).
struct RowContext {
  std::vector<std::size_t> records;
  Eigen::VectorXd g;
  Eigen::MatrixXd h;        // records x p, column-major so h.col(k) is contiguous
  Eigen::VectorXd h_norm2;  // h.col(k).squaredNorm()
};

RowContext build_row_context(const ModelParams& params, const LongitudinalDataset& ds,
                             std::size_t entity, Side side);

struct SweepInfo {
  int sweep = 0;
  double log_posterior = 0.0;
  double rel_change = 0.0;
  std::size_t active_I = 0;  // variables with b_I > 0
  std::size_t active_O = 0;
};

struct SolverOptions {
  int threads = 1;
  // Evaluate the log-posterior after every block (not just every sweep) so
  // an ascent violation names the block responsible. Costs ~5x per sweep.
  bool verify_blocks = false;
  double ascent_slack = 1e-9;  // relative
  std::function<void(const SweepInfo&)> on_sweep;
  std::function<void(const std::string&)> on_warning;
};

struct FitResult {
  ModelParams params;
  FitState state;
  bool converged = false;
  std::uint64_t seed = 0;
};

class IcmSolver {
 public:
  static constexpr double kAlphaFloor = 1e-12;

  IcmSolver(const LongitudinalDataset& ds, HyperPriors hp, SolverOptions options = {});

  const LongitudinalDataset& dataset() const { return ds_; }
  const HyperPriors& hyper_priors() const { return hp_; }

  // Wraps `params` with fresh residuals and a one-entry trace.
  FitState make_state(ModelParams params) const;
  FitState initial_state() const;

  double update_alpha(FitState& state) const;
  void update_theta_row(FitState& state, std::size_t entity, Side side) const;
  // Single-coordinate conditional mode of theta_{entity,k}; the residuals of
  // the entity's records are kept current.
  double update_theta_coordinate(FitState& state, std::size_t entity, Side side, std::size_t k) const;
  // Weighted-median location. A zero-scale column keeps its location.
  double update_mu(FitState& state, std::size_t k, Side side) const;
  double update_b(FitState& state, std::size_t k, Side side) const;

  void sweep(FitState& state) const;

  // Sweeps until the relative change of the log-posterior drops below
  // rel_tol or max_sweeps is reached. The starting point is deterministic;
  // `seed` is recorded with the result for provenance.
  FitResult fit(std::uint64_t seed = 0) const;

  void recompute_residuals(FitState& state) const;

 private:
  const std::vector<std::vector<std::size_t>>& entities(Side side) const;
  void update_theta_block(FitState& state, Side side) const;
  void update_hyper_block(FitState& state, Side side) const;
  void checkpoint(FitState& state, const std::string& block, double& last) const;

  const LongitudinalDataset& ds_;
  HyperPriors hp_;
  SolverOptions options_;
};

// Number of variables with a strictly positive scale on `side`.
std::size_t active_count(const ModelParams& params, Side side);

}  // namespace panelfm
