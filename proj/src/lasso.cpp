#include "panelfm/lasso.hpp"

#include "panelfm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace panelfm {

std::vector<std::size_t> LassoFit::support() const {
  std::vector<std::size_t> out;
  for (Eigen::Index k = 0; k < beta.size(); ++k)
    if (beta[k] != 0.0) out.push_back(static_cast<std::size_t>(k));
  return out;
}

void pooled_design(const LongitudinalDataset& ds, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
  const auto N = static_cast<Eigen::Index>(ds.size());
  X.resize(N, static_cast<Eigen::Index>(ds.p));
  y.resize(N);
  for (Eigen::Index r = 0; r < N; ++r) {
    const auto& rec = ds.records[static_cast<std::size_t>(r)];
    X.row(r) = rec.features.transpose();
    y[r] = rec.outcome;
  }
}

double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoFit& fit) {
  const Eigen::VectorXd r = (y - X * fit.beta).array() - fit.intercept;
  return r.squaredNorm() / (2.0 * static_cast<double>(y.size())) + fit.lambda * fit.beta.lpNorm<1>();
}

double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::VectorXd yc = y.array() - y.mean();
  return (X.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(y.size());
}

LassoFit lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda, int max_iters, double tol) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lasso: lambda must be non-negative");
  if (X.rows() != y.size() || y.size() == 0) throw std::invalid_argument("lasso: design/outcome size mismatch");
  const double N = static_cast<double>(y.size());
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const double y_mean = y.mean();
  const Eigen::VectorXd col_norm = Xc.colwise().squaredNorm().transpose() / N;

  LassoFit fit;
  fit.lambda = lambda;
  fit.beta = Eigen::VectorXd::Zero(X.cols());
  Eigen::VectorXd r = y.array() - y_mean;

  auto objective = [&] { return r.squaredNorm() / (2.0 * N) + lambda * fit.beta.lpNorm<1>(); };
  for (int it = 0; it < max_iters; ++it) {
    double max_change = 0.0;
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
      const double old = fit.beta[k];
      double next = 0.0;
      if (col_norm[k] > 0.0) {
        const double z = Xc.col(k).dot(r) / N + col_norm[k] * old;
        next = std::copysign(std::max(std::abs(z) - lambda, 0.0), z) / col_norm[k];
      }
      if (next != old) {
        r -= (next - old) * Xc.col(k);
        fit.beta[k] = next;
        max_change = std::max(max_change, std::abs(next - old));
      }
    }
    fit.iterations = it + 1;
    fit.objective_trace.push_back(objective());
    if (max_change < tol) {
      fit.converged = true;
      break;
    }
  }
  fit.intercept = y_mean - x_mean.dot(fit.beta);
  return fit;
}

LassoFit lasso_fit(const LongitudinalDataset& ds, double lambda, int max_iters, double tol) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  pooled_design(ds, X, y);
  return lasso_fit(X, y, lambda, max_iters, tol);
}

LassoCvResult lasso_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoCvOptions& options) {
  if (options.n_lambdas < 1 || options.folds < 2) throw std::invalid_argument("lasso_cv: bad grid or fold count");
  const auto N = y.size();
  if (N < options.folds) throw std::invalid_argument("lasso_cv: fewer records than folds");

  LassoCvResult out;
  const double lmax = std::max(lasso_lambda_max(X, y), 1e-12);
  for (int j = 0; j < options.n_lambdas; ++j) {
    const double t = options.n_lambdas == 1 ? 0.0 : static_cast<double>(j) / (options.n_lambdas - 1);
    out.lambdas.push_back(lmax * std::pow(options.min_ratio, t));
  }

  std::vector<int> fold(static_cast<std::size_t>(N));
  for (Eigen::Index r = 0; r < N; ++r) fold[static_cast<std::size_t>(r)] = static_cast<int>(r % options.folds);
  std::mt19937_64 rng(derive_seed(options.seed, "cv-folds"));
  std::shuffle(fold.begin(), fold.end(), rng);

  // sq_err[f][j]: summed held-out squared error of fold f at lambda j.
  std::vector<std::vector<double>> sq_err(static_cast<std::size_t>(options.folds),
                                          std::vector<double>(out.lambdas.size(), 0.0));
  auto run_fold = [&](int f) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index r = 0; r < N; ++r) (fold[static_cast<std::size_t>(r)] == f ? te : tr).push_back(r);
    Eigen::MatrixXd Xtr = X(tr, Eigen::all);
    Eigen::VectorXd ytr = y(tr);
    for (std::size_t j = 0; j < out.lambdas.size(); ++j) {
      auto fit = lasso_fit(Xtr, ytr, out.lambdas[j], options.max_iters, options.tol);
      double s = 0.0;
      for (auto r : te) {
        const double e = y[r] - fit.predict(X.row(r).transpose());
        s += e * e;
      }
      sq_err[static_cast<std::size_t>(f)][j] = s;
    }
  };
  const int workers = std::clamp(options.threads, 1, options.folds);
  if (workers == 1) {
    for (int f = 0; f < options.folds; ++f) run_fold(f);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int f = w; f < options.folds; f += workers) run_fold(f);
      });
  }

  out.cv_mse.assign(out.lambdas.size(), 0.0);
  for (std::size_t j = 0; j < out.lambdas.size(); ++j) {
    for (int f = 0; f < options.folds; ++f) out.cv_mse[j] += sq_err[static_cast<std::size_t>(f)][j];
    out.cv_mse[j] /= static_cast<double>(N);
  }
  const auto best = std::min_element(out.cv_mse.begin(), out.cv_mse.end()) - out.cv_mse.begin();
  out.best_lambda = out.lambdas[static_cast<std::size_t>(best)];
  out.fit = lasso_fit(X, y, out.best_lambda, options.max_iters, options.tol);
  return out;
}

LassoCvResult lasso_cv(const LongitudinalDataset& ds, const LassoCvOptions& options) {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  pooled_design(ds, X, y);
  return lasso_cv(X, y, options);
}

}  // namespace panelfm
