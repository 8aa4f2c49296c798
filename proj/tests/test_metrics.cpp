#include "panelfm/lasso.hpp"
#include "panelfm/metrics.hpp"
#include "panelfm/simulator.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace panelfm;

TEST_CASE("r squared") {
  const std::vector<double> y{0, 1, 2};
  CHECK(r_squared(y, y) == 1.0);
  CHECK(r_squared(y, std::vector<double>{1, 1, 1}) == 0.0);
  CHECK(r_squared(y, std::vector<double>{0, 1, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(r_squared(std::vector<double>{2, 2, 2}, y), UndefinedMetric);
  CHECK_THROWS_AS(r_squared(y, std::vector<double>{1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(r_squared(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("selection score") {
  std::vector<bool> truth(6, false);
  truth[2] = truth[3] = truth[4] = true;
  const std::vector<std::size_t> sel{1, 2, 3};
  auto s = selection_score(sel, truth);
  CHECK(s.fp == 1);
  CHECK(s.fn == 1);

  const std::vector<std::size_t> exact{2, 3, 4};
  s = selection_score(exact, truth);
  CHECK(s.fp == 0);
  CHECK(s.fn == 0);

  std::vector<bool> ten(12, false);
  for (int k = 0; k < 10; ++k) ten[static_cast<std::size_t>(k)] = true;
  s = selection_score(std::vector<std::size_t>{}, ten);
  CHECK(s.fp == 0);
  CHECK(s.fn == 10);

  CHECK_THROWS_AS(selection_score(std::vector<std::size_t>{6}, truth), std::out_of_range);
}

TEST_CASE("selection score accounting over random sets") {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.3);
  for (int t = 0; t < 100; ++t) {
    std::vector<bool> truth(20);
    std::vector<std::size_t> sel;
    std::size_t n_true = 0, hits = 0;
    for (std::size_t k = 0; k < 20; ++k) {
      truth[k] = coin(rng);
      n_true += truth[k];
      if (coin(rng)) {
        sel.push_back(k);
        hits += truth[k];
      }
    }
    auto s = selection_score(sel, truth);
    CHECK(s.fp + hits == sel.size());
    CHECK(s.fn <= n_true);
    CHECK(s.fp <= 20 - n_true);
  }
}

TEST_CASE("splits") {
  SimConfig cfg;
  cfg.n = 12;
  cfg.m = 10;
  cfg.p = 6;
  cfg.n_fixed = 2;
  cfg.n_random = 2;
  auto sim = generate(cfg);

  auto w = split_dataset(sim.data, 0.25, SplitMode::WithinIndividual, 3);
  CHECK(w.train.size() + w.test.size() == sim.data.size());
  CHECK(w.train.n == 12);
  CHECK(w.test.size() == 12 * 3);  // round(2.5) per individual
  for (const auto& rows : w.train.index_by_individual) CHECK(rows.size() >= 1);

  auto again = split_dataset(sim.data, 0.25, SplitMode::WithinIndividual, 3);
  CHECK(again.test.records[0].outcome == w.test.records[0].outcome);

  auto b = split_dataset(sim.data, 0.25, SplitMode::ByIndividual, 3);
  CHECK(b.test.n == 3);
  std::set<std::string> train_ids(b.train.individual_labels.labels().begin(), b.train.individual_labels.labels().end());
  for (const auto& id : b.test.individual_labels.labels()) CHECK(train_ids.count(id) == 0);

  CHECK_THROWS_AS(split_dataset(sim.data, 0.0, SplitMode::WithinIndividual, 1), std::invalid_argument);
}

TEST_CASE("lasso at zero penalty matches the normal equations") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(10, 3);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    for (int k = 0; k < 3; ++k) X(i, k) = z(rng);
    y[i] = 1.5 + X(i, 0) - 2.0 * X(i, 2) + 0.3 * z(rng);
  }
  Eigen::MatrixXd A(10, 4);
  A << Eigen::VectorXd::Ones(10), X;
  Eigen::VectorXd coef = (A.transpose() * A).ldlt().solve(A.transpose() * y);

  auto fit = lasso_fit(X, y, 0.0);
  CHECK(fit.converged);
  CHECK(std::abs(fit.intercept - coef[0]) < 1e-6);
  CHECK((fit.beta - coef.tail(3)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lasso above the activation threshold is empty") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(30, 5);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) {
    for (int k = 0; k < 5; ++k) X(i, k) = z(rng);
    y[i] = X(i, 1) + z(rng);
  }
  const double lmax = lasso_lambda_max(X, y);
  CHECK(lasso_fit(X, y, lmax).beta.isZero(0.0));
  CHECK(lasso_fit(X, y, 2.0 * lmax).beta.isZero(0.0));
  CHECK(lasso_fit(X, y, 2.0 * lmax).intercept == doctest::Approx(y.mean()));
  CHECK_FALSE(lasso_fit(X, y, 0.9 * lmax).beta.isZero(0.0));
}

TEST_CASE("lasso with duplicated columns splits the merged coefficient") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(40, 3);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    for (int k = 0; k < 3; ++k) X(i, k) = z(rng);
    y[i] = 2.0 * X(i, 0) - X(i, 1) + 0.5 * z(rng);
  }
  Eigen::MatrixXd D(40, 4);
  D << X.col(0), X.col(0), X.col(1), X.col(2);
  const double lambda = 0.05;
  auto single = lasso_fit(X, y, lambda, 100000, 1e-12);
  auto dup = lasso_fit(D, y, lambda, 100000, 1e-12);
  CHECK(dup.beta[0] + dup.beta[1] == doctest::Approx(single.beta[0]).epsilon(1e-8));
  CHECK(dup.beta[2] == doctest::Approx(single.beta[1]).epsilon(1e-8));
}

TEST_CASE("lasso objective never increases across cycles") {
  std::mt19937_64 rng(16);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(50, 8);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) {
    for (int k = 0; k < 8; ++k) X(i, k) = z(rng) + (k > 0 ? 0.7 * X(i, k - 1) : 0.0);
    y[i] = X(i, 3) - X(i, 5) + z(rng);
  }
  for (double lambda : {0.0, 0.01, 0.1, 0.5}) {
    auto fit = lasso_fit(X, y, lambda);
    for (std::size_t t = 1; t < fit.objective_trace.size(); ++t)
      CHECK(fit.objective_trace[t] <= fit.objective_trace[t - 1] + 1e-12);
    CHECK(lasso_objective(X, y, fit) == doctest::Approx(fit.objective_trace.back()));
  }
}

TEST_CASE("cross-validated lasso") {
  SimConfig cfg;
  cfg.n = 20;
  cfg.m = 10;
  cfg.p = 20;
  cfg.n_random = 0;
  cfg.noise_sd = 0.3;
  auto sim = generate(cfg);
  LassoCvOptions opts;
  opts.seed = 5;
  auto cv = lasso_cv(sim.data, opts);
  CHECK(cv.lambdas.size() == 20);
  CHECK(cv.cv_mse.size() == 20);
  for (std::size_t j = 1; j < cv.lambdas.size(); ++j) CHECK(cv.lambdas[j] < cv.lambdas[j - 1]);
  auto support = cv.fit.support();
  std::size_t found = 0;
  for (auto k : support) found += sim.truth.informative_mask[k];
  CHECK(found == 5);

  opts.threads = 3;
  auto cv3 = lasso_cv(sim.data, opts);
  CHECK(cv3.cv_mse == cv.cv_mse);
  CHECK(cv3.fit.beta == cv.fit.beta);
}
