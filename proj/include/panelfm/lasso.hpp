#pragma once

#include "panelfm/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace panelfm {

struct LassoFit {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double lambda = 0.0;
  int iterations = 0;  // full coordinate cycles
  bool converged = false;
  std::vector<double> objective_trace;  // after each cycle

  double predict(const Eigen::VectorXd& x) const { return intercept + x.dot(beta); }
  std::vector<std::size_t> support() const;
};

// Cyclic coordinate descent on
//   (1 / 2N) sum (y - b0 - x'beta)^2 + lambda |beta|_1
// with the intercept unpenalized. Stops once the largest coefficient change
// in a cycle is below tol.
LassoFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda, int max_iters = 10000,
                   double tol = 1e-10);
LassoFit lasso_fit(const LongitudinalDataset& ds, double lambda, int max_iters = 10000, double tol = 1e-10);

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoFit& fit);

// Smallest lambda at which every coefficient is zero.
double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct LassoCvOptions {
  int n_lambdas = 20;
  int folds = 5;
  double min_ratio = 1e-3;  // smallest grid value as a fraction of lambda_max
  int threads = 1;
  std::uint64_t seed = 1;
  int max_iters = 10000;
  double tol = 1e-8;
};

struct LassoCvResult {
  std::vector<double> lambdas;
  std::vector<double> cv_mse;
  double best_lambda = 0.0;
  LassoFit fit;  // refit on all data at best_lambda
};

LassoCvResult lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoCvOptions& options = {});
LassoCvResult lasso_cv(const LongitudinalDataset& ds, const LassoCvOptions& options = {});

// Pooled design matrix and outcome vector, one row per record.
void pooled_design(const LongitudinalDataset& ds, Eigen::MatrixXd& X, Eigen::VectorXd& y);

}  // namespace panelfm
