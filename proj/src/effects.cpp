#include "panelfm/effects.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace panelfm {

const char* to_string(CorrelationVerdict v) {
  switch (v) {
    case CorrelationVerdict::LC: return "LC";
    case CorrelationVerdict::CC: return "CC";
    case CorrelationVerdict::MultiLevel: return "multi-level";
    case CorrelationVerdict::None: return "none";
  }
  return "none";
}

namespace {

Eigen::Index checked(std::size_t idx, Eigen::Index bound, const char* what) {
  if (idx >= static_cast<std::size_t>(bound))
    throw std::out_of_range(std::string(what) + " index " + std::to_string(idx) + " out of range");
  return static_cast<Eigen::Index>(idx);
}

Eigen::VectorXd column_means(const RowMatrix& m) {
  if (m.rows() == 0) return Eigen::VectorXd::Zero(m.cols());
  return m.colwise().mean().transpose();
}

double zero_fraction(const RowMatrix& m) {
  if (m.size() == 0) return 0.0;
  return static_cast<double>((m.array() == 0.0).count()) / static_cast<double>(m.size());
}

}  // namespace

Eigen::VectorXd tise(const ModelParams& params, std::size_t individual, std::size_t timepoint) {
  const auto i = checked(individual, params.theta_I.rows(), "individual");
  const auto o = checked(timepoint, params.theta_O.rows(), "time point");
  return (params.theta_I.row(i) + params.theta_O.row(o)).transpose();
}

double interaction_offset(const ModelParams& params, std::size_t individual, std::size_t timepoint) {
  const auto i = checked(individual, params.theta_I.rows(), "individual");
  const auto o = checked(timepoint, params.theta_O.rows(), "time point");
  return params.theta_I.row(i).dot(params.theta_O.row(o));
}

Eigen::VectorXd aise(const ModelParams& params, std::size_t individual) {
  const auto i = checked(individual, params.theta_I.rows(), "individual");
  return params.theta_I.row(i).transpose() + column_means(params.theta_O);
}

Eigen::VectorXd tpae(const ModelParams& params, std::size_t timepoint) {
  const auto o = checked(timepoint, params.theta_O.rows(), "time point");
  return params.theta_O.row(o).transpose() + column_means(params.theta_I);
}

FixedEffects fixed_effects(const ModelParams& params) {
  FixedEffects out;
  const auto P = params.mu_I.size();
  out.mask.resize(static_cast<std::size_t>(P));
  out.beta = Eigen::VectorXd::Zero(P);
  for (Eigen::Index k = 0; k < P; ++k) {
    const bool fixed = params.b_I[k] == 0.0 && params.b_O[k] == 0.0;
    out.mask[static_cast<std::size_t>(k)] = fixed;
    if (fixed) out.beta[k] = params.mu_I[k] + params.mu_O[k];
  }
  return out;
}

bool is_random_column(const ModelParams& params, Side side, std::size_t k) {
  const auto K = static_cast<Eigen::Index>(k);
  return params.b(side)[K] > 0.0 && (params.theta(side).col(K).array() != 0.0).any();
}

EffectsReport selection_report(const ModelParams& params, const ReportOptions& options) {
  if (options.threshold < 0.0) throw std::invalid_argument("selection threshold must be non-negative");
  EffectsReport rep;
  const auto P = params.mu_I.size();
  const auto mean_O = column_means(params.theta_O);
  const auto mean_I = column_means(params.theta_I);
  rep.aise = params.theta_I.rowwise() + mean_O.transpose();
  rep.tpae = params.theta_O.rowwise() + mean_I.transpose();
  for (const auto& [i, o] : options.tise_pairs) rep.tise[{i, o}] = tise(params, i, o);

  auto fe = fixed_effects(params);
  rep.fixed_mask = fe.mask;
  rep.fixed_effects = fe.beta;
  for (Eigen::Index k = 0; k < P; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const bool rand_I = is_random_column(params, Side::Individual, kk);
    const bool rand_O = is_random_column(params, Side::Observation, kk);
    if (rand_I) rep.random_I.push_back(kk);
    if (rand_O) rep.random_O.push_back(kk);
    const bool fixed_hit = fe.mask[kk] && std::abs(fe.beta[k]) > options.threshold;
    if (fixed_hit || rand_I || rand_O) rep.selected.push_back(kk);
  }
  rep.sparsity_I = zero_fraction(params.theta_I);
  rep.sparsity_O = zero_fraction(params.theta_O);

  const bool lc = !rep.random_I.empty();
  const bool cc = !rep.random_O.empty();
  rep.correlation_verdict = lc && cc ? CorrelationVerdict::MultiLevel
                            : lc     ? CorrelationVerdict::LC
                            : cc     ? CorrelationVerdict::CC
                                     : CorrelationVerdict::None;
  return rep;
}

namespace {

std::string feature_name(const std::vector<std::string>& names, std::size_t k) {
  return k < names.size() ? names[k] : "x" + std::to_string(k + 1);
}

nlohmann::json rows_json(const RowMatrix& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    out.push_back(row);
  }
  return out;
}

}  // namespace

std::string report_to_json(const EffectsReport& report, const ModelParams& params,
                           const std::vector<std::string>& feature_names,
                           const LabelIndex& individuals, const LabelIndex& timepoints) {
  using nlohmann::json;
  json j;
  j["correlation_verdict"] = to_string(report.correlation_verdict);
  j["sparsity_I"] = report.sparsity_I;
  j["sparsity_O"] = report.sparsity_O;
  json vars = json::array();
  for (std::size_t k = 0; k < report.fixed_mask.size(); ++k) {
    const auto K = static_cast<Eigen::Index>(k);
    json v;
    v["variable"] = feature_name(feature_names, k);
    v["fixed"] = static_cast<bool>(report.fixed_mask[k]);
    if (report.fixed_mask[k]) v["beta"] = report.fixed_effects[K];
    v["mu_I"] = params.mu_I[K];
    v["mu_O"] = params.mu_O[K];
    v["b_I"] = params.b_I[K];
    v["b_O"] = params.b_O[K];
    vars.push_back(std::move(v));
  }
  j["variables"] = std::move(vars);
  json selected = json::array();
  for (auto k : report.selected) selected.push_back(feature_name(feature_names, k));
  j["selected"] = std::move(selected);
  j["selected_index"] = report.selected;
  j["random_I"] = report.random_I;
  j["random_O"] = report.random_O;
  j["individuals"] = individuals.labels();
  j["timepoints"] = timepoints.labels();
  j["aise"] = rows_json(report.aise);
  j["tpae"] = rows_json(report.tpae);
  json t = json::array();
  for (const auto& [key, vec] : report.tise) {
    t.push_back({{"id", individuals.size() > key.first ? individuals.label(key.first) : std::to_string(key.first)},
                 {"time", timepoints.size() > key.second ? timepoints.label(key.second) : std::to_string(key.second)},
                 {"gamma", std::vector<double>(vec.data(), vec.data() + vec.size())},
                 {"interaction_offset", interaction_offset(params, key.first, key.second)}});
  }
  j["tise"] = std::move(t);
  return j.dump(1) + "\n";
}

std::string report_to_csv(const EffectsReport& report, const ModelParams& params,
                          const std::vector<std::string>& feature_names) {
  std::ostringstream out;
  char buf[32];
  auto num = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  };
  std::vector<bool> selected(report.fixed_mask.size(), false);
  for (auto k : report.selected) selected[k] = true;
  out << "variable,fixed_mask,beta,b_I,b_O,selected\n";
  for (std::size_t k = 0; k < report.fixed_mask.size(); ++k) {
    const auto K = static_cast<Eigen::Index>(k);
    out << feature_name(feature_names, k) << ',' << (report.fixed_mask[k] ? 1 : 0) << ','
        << (report.fixed_mask[k] ? num(report.fixed_effects[K]) : std::string()) << ','
        << num(params.b_I[K]) << ',' << num(params.b_O[K]) << ',' << (selected[k] ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace panelfm
