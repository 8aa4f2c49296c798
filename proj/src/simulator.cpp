#include "panelfm/simulator.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace panelfm {

const char* to_string(Correlation c) {
  switch (c) {
    case Correlation::LC: return "lc";
    case Correlation::CC: return "cc";
    case Correlation::Multi: return "multi";
  }
  return "multi";
}

Correlation parse_correlation(const std::string& token) {
  std::string t = token;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "lc") return Correlation::LC;
  if (t == "cc") return Correlation::CC;
  if (t == "multi") return Correlation::Multi;
  throw std::invalid_argument("unknown correlation '" + token + "' (expected one of lc, cc, multi)");
}

void SimConfig::check() const {
  if (n < 1 || m < 1 || p < 1) throw std::invalid_argument("n, m and p must be positive");
  if (n_fixed + n_random > p) throw std::invalid_argument("n_fixed + n_random must not exceed p");
  if (!(noise_sd >= 0.0) || !(effect_scale >= 0.0) || !(random_effect_sd >= 0.0))
    throw std::invalid_argument("noise_sd, effect_scale and random_effect_sd must be non-negative");
  if (!(keep_probability > 0.0 && keep_probability <= 1.0))
    throw std::invalid_argument("keep_probability must lie in (0, 1]");
  if (!(std::abs(covariate_ar) < 1.0)) throw std::invalid_argument("covariate_ar must lie in (-1, 1)");
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& stream) {
  // FNV-1a over the stream name, mixed with the master seed by splitmix64.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = master ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Simulation generate(const SimConfig& cfg) {
  cfg.check();
  std::mt19937_64 rng(derive_seed(cfg.seed, "data"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto P = static_cast<Eigen::Index>(cfg.p);

  // Informative columns: a random subset, first n_fixed of it fixed.
  std::vector<std::size_t> order(cfg.p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  SimTruth truth;
  truth.beta_true = Eigen::VectorXd::Zero(P);
  truth.informative_mask.assign(cfg.p, false);
  truth.random_mask.assign(cfg.p, false);
  for (std::size_t j = 0; j < cfg.n_fixed; ++j) {
    const auto k = order[j];
    truth.informative_mask[k] = true;
    truth.beta_true[static_cast<Eigen::Index>(k)] = (unif(rng) < 0.5 ? -1.0 : 1.0) * cfg.effect_scale;
  }
  for (std::size_t j = cfg.n_fixed; j < cfg.n_fixed + cfg.n_random; ++j) {
    truth.informative_mask[order[j]] = true;
    truth.random_mask[order[j]] = true;
  }

  truth.gamma_I_true = RowMatrix::Zero(static_cast<Eigen::Index>(cfg.n), P);
  truth.gamma_O_true = RowMatrix::Zero(static_cast<Eigen::Index>(cfg.m), P);
  const std::size_t lc_share = (cfg.n_random + 1) / 2;
  for (std::size_t j = 0; j < cfg.n_random; ++j) {
    const auto K = static_cast<Eigen::Index>(order[cfg.n_fixed + j]);
    bool lc = cfg.correlation != Correlation::CC;
    bool cc = cfg.correlation != Correlation::LC;
    if (cfg.correlation == Correlation::Multi && !cfg.shared_random_columns) {
      lc = j < lc_share;
      cc = !lc;
    }
    if (lc)
      for (Eigen::Index i = 0; i < truth.gamma_I_true.rows(); ++i)
        truth.gamma_I_true(i, K) = cfg.random_effect_sd * normal(rng);
    if (cc)
      for (Eigen::Index o = 0; o < truth.gamma_O_true.rows(); ++o)
        truth.gamma_O_true(o, K) = cfg.random_effect_sd * normal(rng);
  }

  LabelIndex individuals, timepoints;
  for (std::size_t i = 0; i < cfg.n; ++i) individuals.intern("i" + std::to_string(i + 1));
  for (std::size_t o = 0; o < cfg.m; ++o) timepoints.intern("t" + std::to_string(o + 1));

  std::vector<Record> records;
  records.reserve(cfg.n * cfg.m);
  const double innovation_sd = std::sqrt(1.0 - cfg.covariate_ar * cfg.covariate_ar);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    // Keep pattern first so covariate and noise draws do not depend on it.
    std::vector<bool> keep(cfg.m, true);
    if (cfg.keep_probability < 1.0) {
      for (std::size_t o = 0; o < cfg.m; ++o) keep[o] = unif(rng) < cfg.keep_probability;
      if (std::none_of(keep.begin(), keep.end(), [](bool b) { return b; }))
        keep[std::uniform_int_distribution<std::size_t>(0, cfg.m - 1)(rng)] = true;
    }
    Eigen::VectorXd x(P);
    for (std::size_t o = 0; o < cfg.m; ++o) {
      for (Eigen::Index k = 0; k < P; ++k) {
        const double z = normal(rng);
        x[k] = o == 0 ? z : cfg.covariate_ar * x[k] + innovation_sd * z;
      }
      const double noise = cfg.noise_sd * normal(rng);
      if (!keep[o]) continue;
      Eigen::VectorXd coef = truth.beta_true;
      coef += truth.gamma_I_true.row(static_cast<Eigen::Index>(i)).transpose();
      coef += truth.gamma_O_true.row(static_cast<Eigen::Index>(o)).transpose();
      Record rec;
      rec.individual = i;
      rec.timepoint = o;
      rec.features = x;
      rec.outcome = x.dot(coef) + noise;
      records.push_back(std::move(rec));
    }
  }
  Simulation sim;
  sim.data = LongitudinalDataset::from_records(std::move(records), std::move(individuals),
                                               std::move(timepoints), cfg.p);
  sim.truth = std::move(truth);
  return sim;
}

namespace {

nlohmann::json rows_json(const RowMatrix& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    out.push_back(row);
  }
  return out;
}

RowMatrix rows_from_json(const nlohmann::json& j, Eigen::Index cols) {
  RowMatrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = j.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("truth: ragged gamma matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

std::string truth_to_json(const SimTruth& truth) {
  nlohmann::json j;
  j["beta_true"] = std::vector<double>(truth.beta_true.data(), truth.beta_true.data() + truth.beta_true.size());
  j["informative_mask"] = std::vector<bool>(truth.informative_mask);
  j["random_mask"] = std::vector<bool>(truth.random_mask);
  j["gamma_I_true"] = rows_json(truth.gamma_I_true);
  j["gamma_O_true"] = rows_json(truth.gamma_O_true);
  return j.dump(1) + "\n";
}

SimTruth truth_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    SimTruth t;
    auto beta = j.at("beta_true").get<std::vector<double>>();
    t.beta_true = Eigen::Map<Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    t.informative_mask = j.at("informative_mask").get<std::vector<bool>>();
    t.random_mask = j.value("random_mask", std::vector<bool>(t.informative_mask.size(), false));
    const auto P = static_cast<Eigen::Index>(beta.size());
    t.gamma_I_true = rows_from_json(j.value("gamma_I_true", nlohmann::json::array()), P);
    t.gamma_O_true = rows_from_json(j.value("gamma_O_true", nlohmann::json::array()), P);
    if (t.informative_mask.size() != beta.size()) throw DataError("truth: mask length differs from beta_true");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("truth: ") + e.what());
  }
}

void save_truth(const std::filesystem::path& path, const SimTruth& truth) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write truth file '" + path.string() + "'");
  out << truth_to_json(truth);
}

SimTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open truth file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return truth_from_json(ss.str());
}

}  // namespace panelfm
