#include "panelfm/simulator.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

using namespace panelfm;

namespace {

std::size_t count_true(const std::vector<bool>& v) {
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), true));
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

}  // namespace

TEST_CASE("noise-free fixed-effect data is exactly linear") {
  SimConfig cfg;
  cfg.n = 10;
  cfg.m = 8;
  cfg.p = 12;
  cfg.n_fixed = 4;
  cfg.n_random = 0;
  cfg.noise_sd = 0.0;
  cfg.seed = 21;
  auto sim = generate(cfg);
  const auto N = static_cast<Eigen::Index>(sim.data.size());
  Eigen::MatrixXd X(N, 12);
  Eigen::VectorXd y(N);
  for (Eigen::Index r = 0; r < N; ++r) {
    X.row(r) = sim.data.records[static_cast<std::size_t>(r)].features.transpose();
    y[r] = sim.data.records[static_cast<std::size_t>(r)].outcome;
  }
  Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  CHECK((beta - sim.truth.beta_true).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(count_true(sim.truth.informative_mask) == 4);
  CHECK(count_true(sim.truth.random_mask) == 0);
}

TEST_CASE("truth layout per correlation structure") {
  for (auto c : {Correlation::LC, Correlation::CC, Correlation::Multi}) {
    SimConfig cfg;
    cfg.n = 6;
    cfg.m = 5;
    cfg.p = 20;
    cfg.correlation = c;
    auto sim = generate(cfg);
    const auto& t = sim.truth;
    CHECK(count_true(t.informative_mask) == 10);
    CHECK(count_true(t.random_mask) == 5);
    std::size_t on_I = 0, on_O = 0;
    for (Eigen::Index k = 0; k < 20; ++k) {
      const bool rI = !t.gamma_I_true.col(k).isZero(0.0);
      const bool rO = !t.gamma_O_true.col(k).isZero(0.0);
      if (rI || rO) CHECK(t.random_mask[static_cast<std::size_t>(k)]);
      if (t.random_mask[static_cast<std::size_t>(k)]) CHECK(t.beta_true[k] == 0.0);
      on_I += rI;
      on_O += rO;
    }
    if (c == Correlation::LC) {
      CHECK(t.gamma_O_true.isZero(0.0));
      CHECK(on_I == 5);
    } else if (c == Correlation::CC) {
      CHECK(t.gamma_I_true.isZero(0.0));
      CHECK(on_O == 5);
    } else {
      CHECK(on_I == 3);
      CHECK(on_O == 2);
    }
  }

  SimConfig shared;
  shared.p = 10;
  shared.shared_random_columns = true;
  auto s = generate(shared);
  for (Eigen::Index k = 0; k < 10; ++k) {
    if (!s.truth.random_mask[static_cast<std::size_t>(k)]) continue;
    CHECK_FALSE(s.truth.gamma_I_true.col(k).isZero(0.0));
    CHECK_FALSE(s.truth.gamma_O_true.col(k).isZero(0.0));
  }
}

TEST_CASE("longitudinal random effects induce within-individual correlation") {
  // With gamma_O = 0 and fixed part removed, the per-individual least-squares
  // slope on a random column tracks that individual's true coefficient.
  SimConfig cfg;
  cfg.n = 30;
  cfg.m = 40;
  cfg.p = 6;
  cfg.n_fixed = 1;
  cfg.n_random = 1;
  cfg.correlation = Correlation::LC;
  cfg.seed = 5;
  auto sim = generate(cfg);
  Eigen::Index k = 0;
  while (!sim.truth.random_mask[static_cast<std::size_t>(k)]) ++k;
  Eigen::VectorXd est(30), truth(30);
  for (std::size_t i = 0; i < 30; ++i) {
    double xy = 0.0, xx = 0.0;
    for (auto r : sim.data.index_by_individual[i]) {
      const auto& rec = sim.data.records[r];
      const double partial = rec.outcome - rec.features.dot(sim.truth.beta_true);
      xy += rec.features[k] * partial;
      xx += rec.features[k] * rec.features[k];
    }
    est[static_cast<Eigen::Index>(i)] = xy / xx;
    truth[static_cast<Eigen::Index>(i)] = sim.truth.gamma_I_true(static_cast<Eigen::Index>(i), k);
  }
  CHECK(correlation(est, truth) > 0.9);
}

TEST_CASE("balanced and unbalanced panels") {
  SimConfig cfg;
  auto sim = generate(cfg);
  CHECK(sim.data.size() == 1600);
  CHECK(sim.data.n == 40);
  CHECK(sim.data.m == 40);

  cfg.keep_probability = 0.5;
  cfg.n = 50;
  cfg.m = 20;
  cfg.p = 8;
  cfg.n_fixed = 2;
  cfg.n_random = 2;
  auto u = generate(cfg);
  CHECK(validate(u.data).empty());
  const double frac = static_cast<double>(u.data.size()) / 1000.0;
  CHECK(frac == doctest::Approx(0.5).epsilon(0.1));
  for (const auto& idx : u.data.index_by_individual) CHECK_FALSE(idx.empty());

  cfg.keep_probability = 0.001;
  auto sparse = generate(cfg);
  for (const auto& idx : sparse.data.index_by_individual) CHECK_FALSE(idx.empty());
}

TEST_CASE("autoregressive covariates") {
  SimConfig cfg;
  cfg.n = 50;
  cfg.m = 30;
  cfg.p = 4;
  cfg.n_fixed = 1;
  cfg.n_random = 1;
  cfg.covariate_ar = 0.8;
  auto sim = generate(cfg);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const auto& idx = sim.data.index_by_individual[i];
    for (std::size_t j = 1; j < idx.size(); ++j) {
      num += sim.data.records[idx[j]].features[0] * sim.data.records[idx[j - 1]].features[0];
      den += sim.data.records[idx[j]].features[0] * sim.data.records[idx[j]].features[0];
    }
  }
  CHECK(num / den == doctest::Approx(0.8).epsilon(0.1));
}

TEST_CASE("determinism and seeds") {
  SimConfig cfg;
  cfg.p = 15;
  auto a = generate(cfg);
  auto b = generate(cfg);
  REQUIRE(a.data.size() == b.data.size());
  for (std::size_t r = 0; r < a.data.size(); ++r) {
    CHECK(a.data.records[r].outcome == b.data.records[r].outcome);
    CHECK(a.data.records[r].features == b.data.records[r].features);
  }
  CHECK(a.truth.gamma_I_true == b.truth.gamma_I_true);

  cfg.seed = 2;
  auto c = generate(cfg);
  CHECK(c.data.records[0].outcome != a.data.records[0].outcome);

  CHECK(derive_seed(1, "data") == derive_seed(1, "data"));
  CHECK(derive_seed(1, "data") != derive_seed(1, "cv-folds"));
  CHECK(derive_seed(1, "data") != derive_seed(2, "data"));
}

TEST_CASE("configuration checks") {
  SimConfig cfg;
  cfg.p = 8;
  CHECK_THROWS_AS(generate(cfg), std::invalid_argument);
  cfg = {};
  cfg.keep_probability = 0.0;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
  cfg = {};
  cfg.covariate_ar = 1.0;
  CHECK_THROWS_AS(cfg.check(), std::invalid_argument);

  CHECK(parse_correlation("LC") == Correlation::LC);
  CHECK(parse_correlation("multi") == Correlation::Multi);
  try {
    parse_correlation("xyz");
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("lc, cc, multi") != std::string::npos);
  }
}

TEST_CASE("truth json round trip") {
  SimConfig cfg;
  cfg.n = 4;
  cfg.m = 3;
  cfg.p = 12;
  auto sim = generate(cfg);
  auto back = truth_from_json(truth_to_json(sim.truth));
  CHECK(back.beta_true == sim.truth.beta_true);
  CHECK(back.gamma_I_true == sim.truth.gamma_I_true);
  CHECK(back.gamma_O_true == sim.truth.gamma_O_true);
  CHECK(back.informative_mask == sim.truth.informative_mask);
  CHECK(back.random_mask == sim.truth.random_mask);
  CHECK_THROWS_AS(truth_from_json("[1,2"), DataError);
}
