#include "panelfm/model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace panelfm {

const char* to_string(Side side) { return side == Side::Individual ? "I" : "O"; }

void HyperPriors::check() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(alpha0, "alpha0");
  positive(beta0, "beta0");
  positive(b_mu0, "b_mu0");
  positive(b_b0, "b_b0");
  positive(rel_tol, "rel_tol");
  positive(b_floor, "b_floor");
  if (rel_tol >= 1.0) throw std::invalid_argument("rel_tol must be < 1");
  if (b_floor >= 1e-3) throw std::invalid_argument("b_floor must be << 1");
  if (max_sweeps < 0) throw std::invalid_argument("max_sweeps must be non-negative");
}

ModelParams ModelParams::initial(std::size_t n, std::size_t m, std::size_t p, const HyperPriors& hp) {
  ModelParams params;
  const auto P = static_cast<Eigen::Index>(p);
  params.alpha = hp.alpha0 / hp.beta0;
  params.theta_I = RowMatrix::Zero(static_cast<Eigen::Index>(n), P);
  params.theta_O = RowMatrix::Zero(static_cast<Eigen::Index>(m), P);
  params.mu_I = Eigen::VectorXd::Zero(P);
  params.mu_O = Eigen::VectorXd::Zero(P);
  params.b_I = Eigen::VectorXd::Ones(P);
  params.b_O = Eigen::VectorXd::Ones(P);
  return params;
}

std::vector<std::string> ModelParams::violations() const {
  std::vector<std::string> out;
  if (!(alpha > 0.0) || !std::isfinite(alpha)) out.push_back("alpha must be positive and finite");
  const auto P = mu_I.size();
  if (theta_I.cols() != P || theta_O.cols() != P || mu_O.size() != P || b_I.size() != P ||
      b_O.size() != P) {
    out.push_back("inconsistent latent dimension");
    return out;
  }
  for (Side s : {Side::Individual, Side::Observation}) {
    const auto& th = theta(s);
    if (!th.allFinite() || !mu(s).allFinite() || !b(s).allFinite())
      out.push_back(std::string("non-finite entry on side ") + to_string(s));
    for (Eigen::Index k = 0; k < P; ++k) {
      if (b(s)[k] < 0.0) {
        out.push_back("negative scale b_" + std::string(to_string(s)) + "[" + std::to_string(k) + "]");
      } else if (b(s)[k] == 0.0 && th.rows() > 0 && !(th.col(k).array() == mu(s)[k]).all()) {
        out.push_back("column " + std::to_string(k) + " on side " + to_string(s) +
                      " has zero scale but is off its location");
      }
    }
  }
  return out;
}

namespace {

void check_index(std::size_t idx, Eigen::Index bound, const char* what) {
  if (idx >= static_cast<std::size_t>(bound))
    throw std::out_of_range(std::string(what) + " index " + std::to_string(idx) + " out of range");
}

void check_features(const ModelParams& params, const Eigen::VectorXd& x) {
  if (x.size() != params.mu_I.size())
    throw std::invalid_argument("feature length " + std::to_string(x.size()) + " != p = " +
                                std::to_string(params.mu_I.size()));
}

}  // namespace

double predict(const ModelParams& params, const Eigen::VectorXd& x, std::size_t individual,
               std::size_t timepoint) {
  check_index(individual, params.theta_I.rows(), "individual");
  check_index(timepoint, params.theta_O.rows(), "time point");
  check_features(params, x);
  auto ti = params.theta_I.row(static_cast<Eigen::Index>(individual));
  auto to = params.theta_O.row(static_cast<Eigen::Index>(timepoint));
  return x.dot(ti.transpose() + to.transpose()) + ti.dot(to);
}

double predict_record(const ModelParams& params, const Record& rec) {
  return predict(params, rec.features, rec.individual, rec.timepoint);
}

double predict_unseen_individual(const ModelParams& params, const Eigen::VectorXd& x,
                                 std::size_t timepoint) {
  check_index(timepoint, params.theta_O.rows(), "time point");
  check_features(params, x);
  auto to = params.theta_O.row(static_cast<Eigen::Index>(timepoint)).transpose();
  return x.dot(params.mu_I + to) + to.dot(params.mu_I);
}

double predict_unseen_timepoint(const ModelParams& params, const Eigen::VectorXd& x,
                                std::size_t individual) {
  check_index(individual, params.theta_I.rows(), "individual");
  check_features(params, x);
  auto ti = params.theta_I.row(static_cast<Eigen::Index>(individual)).transpose();
  return x.dot(ti + params.mu_O) + ti.dot(params.mu_O);
}

double predict_unseen_both(const ModelParams& params, const Eigen::VectorXd& x) {
  check_features(params, x);
  return x.dot(params.mu_I + params.mu_O) + params.mu_I.dot(params.mu_O);
}

double laplace_column_log_density(const RowMatrix& theta, Eigen::Index k, double mu, double b,
                                  double b_floor) {
  const auto N = static_cast<double>(theta.rows());
  double abs_dev = 0.0;
  for (Eigen::Index e = 0; e < theta.rows(); ++e) abs_dev += std::abs(theta(e, k) - mu);
  if (b <= 0.0) {
    if (abs_dev != 0.0) return -std::numeric_limits<double>::infinity();
    return -N * std::log(2.0 * b_floor);
  }
  const double scale = std::max(b, b_floor);
  return -N * std::log(2.0 * scale) - abs_dev / scale;
}

LogPosteriorTerms log_posterior_terms(const ModelParams& params, const HyperPriors& hp,
                                      const LongitudinalDataset& ds) {
  if (!(params.alpha > 0.0)) throw std::invalid_argument("log_posterior: alpha must be positive");
  LogPosteriorTerms t;

  double rss = 0.0;
  for (const auto& rec : ds.records) {
    const double r = rec.outcome - predict_record(params, rec);
    rss += r * r;
  }
  const auto count = static_cast<double>(ds.size());
  t.likelihood = 0.5 * count * std::log(params.alpha / (2.0 * std::numbers::pi)) - 0.5 * params.alpha * rss;

  t.alpha_prior = hp.alpha0 * std::log(hp.beta0) - std::lgamma(hp.alpha0) +
                  (hp.alpha0 - 1.0) * std::log(params.alpha) - hp.beta0 * params.alpha;

  for (Side s : {Side::Individual, Side::Observation}) {
    const auto& th = params.theta(s);
    const auto& mu = params.mu(s);
    const auto& b = params.b(s);
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
      t.theta_prior += laplace_column_log_density(th, k, mu[k], b[k], hp.b_floor);
      t.mu_prior += -std::log(2.0 * hp.b_mu0) - std::abs(mu[k]) / hp.b_mu0;
      t.b_prior += -std::log(hp.b_b0) - b[k] / hp.b_b0;
    }
  }
  return t;
}

double log_posterior(const ModelParams& params, const HyperPriors& hp, const LongitudinalDataset& ds) {
  return log_posterior_terms(params, hp, ds).total();
}

const char* to_string(Route route) {
  switch (route) {
    case Route::Seen: return "seen";
    case Route::UnseenIndividual: return "unseen_individual";
    case Route::UnseenTimepoint: return "unseen_timepoint";
    case Route::UnseenBoth: return "unseen_both";
  }
  return "seen";
}

LabeledPrediction predict_labeled(const Model& model, const std::string& individual,
                                  const std::string& timepoint, const Eigen::VectorXd& x) {
  const auto i = model.individuals.find(individual);
  const auto o = model.timepoints.find(timepoint);
  if (i && o) return {predict(model.params, x, *i, *o), Route::Seen};
  if (o) return {predict_unseen_individual(model.params, x, *o), Route::UnseenIndividual};
  if (i) return {predict_unseen_timepoint(model.params, x, *i), Route::UnseenTimepoint};
  return {predict_unseen_both(model.params, x), Route::UnseenBoth};
}

// ---- serialization ---------------------------------------------------------

using nlohmann::json;

namespace {

json matrix_to_json(const RowMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

RowMatrix matrix_from_json(const json& j, Eigen::Index cols, const char* name) {
  RowMatrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw DataError(std::string("model: row ") + std::to_string(r) + " of " + name + " has wrong length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string model_to_json(const Model& model) {
  const auto& p = model.params;
  json j;
  j["format"] = "panelfm-model/1";
  j["p"] = p.p();
  j["alpha"] = p.alpha;
  j["theta_I"] = matrix_to_json(p.theta_I);
  j["theta_O"] = matrix_to_json(p.theta_O);
  j["mu_I"] = vector_to_json(p.mu_I);
  j["mu_O"] = vector_to_json(p.mu_O);
  j["b_I"] = vector_to_json(p.b_I);
  j["b_O"] = vector_to_json(p.b_O);
  j["individuals"] = model.individuals.labels();
  j["timepoints"] = model.timepoints.labels();
  j["features"] = model.feature_names;
  j["seed"] = model.seed;
  j["hyper_priors"] = {{"alpha0", model.hyper.alpha0},     {"beta0", model.hyper.beta0},
                       {"b_mu0", model.hyper.b_mu0},       {"b_b0", model.hyper.b_b0},
                       {"max_sweeps", model.hyper.max_sweeps}, {"rel_tol", model.hyper.rel_tol},
                       {"b_floor", model.hyper.b_floor}};
  // nlohmann writes doubles with max_digits10, so reload is exact.
  return j.dump(1) + "\n";
}

Model model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("model: invalid JSON: ") + e.what());
  }
  try {
    Model model;
    const auto P = j.at("p").get<Eigen::Index>();
    auto& p = model.params;
    p.alpha = j.at("alpha").get<double>();
    p.theta_I = matrix_from_json(j.at("theta_I"), P, "theta_I");
    p.theta_O = matrix_from_json(j.at("theta_O"), P, "theta_O");
    p.mu_I = vector_from_json(j.at("mu_I"));
    p.mu_O = vector_from_json(j.at("mu_O"));
    p.b_I = vector_from_json(j.at("b_I"));
    p.b_O = vector_from_json(j.at("b_O"));
    model.individuals = LabelIndex::from_labels(j.at("individuals").get<std::vector<std::string>>());
    model.timepoints = LabelIndex::from_labels(j.at("timepoints").get<std::vector<std::string>>());
    model.feature_names = j.value("features", std::vector<std::string>{});
    model.seed = j.value("seed", std::uint64_t{0});
    const auto& h = j.at("hyper_priors");
    model.hyper.alpha0 = h.at("alpha0").get<double>();
    model.hyper.beta0 = h.at("beta0").get<double>();
    model.hyper.b_mu0 = h.at("b_mu0").get<double>();
    model.hyper.b_b0 = h.at("b_b0").get<double>();
    model.hyper.max_sweeps = h.at("max_sweeps").get<int>();
    model.hyper.rel_tol = h.at("rel_tol").get<double>();
    model.hyper.b_floor = h.at("b_floor").get<double>();
    if (model.individuals.size() != p.n() || model.timepoints.size() != p.m())
      throw DataError("model: label maps do not match factor matrix sizes");
    auto bad = p.violations();
    if (!bad.empty()) throw DataError("model: " + bad.front());
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("model: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file '" + path.string() + "'");
  out << model_to_json(model);
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace panelfm
