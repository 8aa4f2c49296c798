#pragma once
// Small hand-built datasets and random parameter states shared by tests.

#include "panelfm/dataset.hpp"
#include "panelfm/model.hpp"

#include <random>
#include <string>
#include <vector>

namespace panelfm::fixture {

struct Row {
  std::size_t i;
  std::size_t o;
  double y;
  std::vector<double> x;
};

inline LongitudinalDataset make_dataset(std::size_t n, std::size_t m, std::size_t p, const std::vector<Row>& rows) {
  std::vector<Record> records;
  for (const auto& r : rows) {
    Record rec;
    rec.individual = r.i;
    rec.timepoint = r.o;
    rec.outcome = r.y;
    rec.features = Eigen::Map<const Eigen::VectorXd>(r.x.data(), static_cast<Eigen::Index>(r.x.size()));
    records.push_back(std::move(rec));
  }
  LabelIndex ind, tp;
  for (std::size_t i = 0; i < n; ++i) ind.intern("i" + std::to_string(i + 1));
  for (std::size_t o = 0; o < m; ++o) tp.intern("t" + std::to_string(o + 1));
  return LongitudinalDataset::from_records(std::move(records), std::move(ind), std::move(tp), p);
}

inline ModelParams zero_params(std::size_t n, std::size_t m, std::size_t p) {
  return ModelParams::initial(n, m, p, HyperPriors{});
}

// Random unbalanced panel with Gaussian features and outcomes.
inline LongitudinalDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t p,
                                          double keep = 0.7) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution coin(keep);
  std::vector<Row> rows;
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t o = 0; o < m; ++o) {
      if (!coin(rng) && (any || o + 1 < m)) continue;
      any = true;
      Row r{i, o, z(rng), {}};
      for (std::size_t k = 0; k < p; ++k) r.x.push_back(z(rng));
      rows.push_back(std::move(r));
    }
  }
  return make_dataset(n, m, p, rows);
}

// Random valid parameters: some zero-scale columns pinned to their location,
// some exact zeros in the factors.
inline ModelParams random_params(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t p) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  std::bernoulli_distribution coin(0.25);
  ModelParams prm = zero_params(n, m, p);
  prm.alpha = u(rng);
  for (Side s : {Side::Individual, Side::Observation}) {
    auto& th = prm.theta(s);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(p); ++k) {
      prm.mu(s)[k] = coin(rng) ? 0.0 : 0.5 * z(rng);
      prm.b(s)[k] = coin(rng) ? 0.0 : u(rng);
      for (Eigen::Index e = 0; e < th.rows(); ++e) {
        if (prm.b(s)[k] == 0.0 || coin(rng))
          th(e, k) = prm.mu(s)[k];
        else
          th(e, k) = 0.5 * z(rng);
      }
    }
  }
  return prm;
}

}  // namespace panelfm::fixture
