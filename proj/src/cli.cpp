#include "panelfm/cli.hpp"

#include "panelfm/dataset.hpp"
#include "panelfm/effects.hpp"
#include "panelfm/icm_solver.hpp"
#include "panelfm/lasso.hpp"
#include "panelfm/metrics.hpp"
#include "panelfm/model.hpp"
#include "panelfm/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace panelfm {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Writes to `path`, or to `fallback` when path is empty or "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw DataError("cannot write '" + path + "'");
      os_ = file_.get();
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

struct SimulateArgs {
  SimConfig cfg;
  std::string correlation = "multi";
  std::string output;
  std::string truth;
  std::string test_output;
  double test_fraction = 0.2;
  std::string split = "within";
};

struct FitArgs {
  std::string input;
  std::string output;
  std::string diagnostics;
  HyperPriors hp;
  int threads = 1;
  std::uint64_t seed = 1;
};

struct PredictArgs {
  std::string model;
  std::string input;
  std::string output;
};

struct EffectsArgs {
  std::string model;
  std::string output;
  std::string csv;
  double threshold = 0.0;
  bool tise = false;
};

struct EvaluateArgs {
  std::string model;
  std::string input;
  std::string truth;
  std::string output;
  std::string lasso_train;
  double threshold = 0.0;
  int threads = 1;
  std::uint64_t seed = 1;
};

SplitMode parse_split(const std::string& s) {
  if (s == "within") return SplitMode::WithinIndividual;
  if (s == "individual") return SplitMode::ByIndividual;
  throw UsageError("unknown split '" + s + "' (expected within or individual)");
}

int cmd_simulate(SimulateArgs& a, std::ostream& out) {
  try {
    a.cfg.correlation = parse_correlation(a.correlation);
    a.cfg.check();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto sim = generate(a.cfg);
  if (!a.test_output.empty()) {
    auto split = split_dataset(sim.data, a.test_fraction, parse_split(a.split), a.cfg.seed);
    write_long_csv(a.output, split.train);
    write_long_csv(a.test_output, split.test);
    out << "n=" << sim.data.n << " m=" << sim.data.m << " p=" << sim.data.p << " records=" << sim.data.size()
        << " train=" << split.train.size() << " test=" << split.test.size() << '\n';
  } else {
    write_long_csv(a.output, sim.data);
    out << "n=" << sim.data.n << " m=" << sim.data.m << " p=" << sim.data.p << " records=" << sim.data.size()
        << '\n';
  }
  if (!a.truth.empty()) save_truth(a.truth, sim.truth);
  return kExitOk;
}

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  try {
    a.hp.check();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto ds = load_dataset(a.input);
  std::optional<Sink> diag;
  if (!a.diagnostics.empty()) diag.emplace(a.diagnostics, err);

  SolverOptions opts;
  opts.threads = a.threads;
  opts.on_warning = [&err](const std::string& msg) { err << "warning: " << msg << '\n'; };
  if (diag) {
    **diag << "sweep\tlog_posterior\trel_change\tactive_I\tactive_O\n";
    opts.on_sweep = [&diag](const SweepInfo& s) {
      **diag << s.sweep << '\t' << fmt_double(s.log_posterior) << '\t' << fmt_double(s.rel_change) << '\t'
             << s.active_I << '\t' << s.active_O << '\n';
    };
  }
  IcmSolver solver(ds, a.hp, opts);
  FitResult result;
  try {
    result = solver.fit(a.seed);
  } catch (const AscentViolation& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitAscentViolation;
  } catch (const NumericalError& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitAscentViolation;
  }

  Model model;
  model.params = result.params;
  model.hyper = a.hp;
  model.individuals = ds.individual_labels;
  model.timepoints = ds.timepoint_labels;
  model.feature_names = ds.feature_names;
  model.seed = a.seed;
  save_model(a.output, model);

  const auto& trace = result.state.log_posterior_trace;
  out << "sweeps=" << result.state.sweep_count << " converged=" << (result.converged ? "true" : "false")
      << " log_posterior=" << fmt_double(trace.back()) << " active_I=" << active_count(result.params, Side::Individual)
      << " active_O=" << active_count(result.params, Side::Observation) << '\n';
  if (!result.converged && a.hp.max_sweeps > 0) {
    err << "warning: no convergence within " << a.hp.max_sweeps << " sweeps\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

void check_width(const Model& model, std::size_t p, const std::string& source) {
  if (p != model.params.p())
    throw DataError(source + " has p = " + std::to_string(p) + " features but the model has p = " +
                    std::to_string(model.params.p()));
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const auto model = load_model(a.model);
  const auto table = read_long_csv(a.input);
  check_width(model, table.feature_names.size(), a.input);
  Sink sink(a.output, out);
  *sink << "id,time,y,y_pred,route\n";
  for (const auto& row : table.rows) {
    auto pred = predict_labeled(model, row.id, row.time, row.x);
    *sink << row.id << ',' << row.time << ',' << fmt_double(row.y) << ',' << fmt_double(pred.value) << ','
           << to_string(pred.route) << '\n';
  }
  return kExitOk;
}

int cmd_effects(const EffectsArgs& a, std::ostream& out) {
  const auto model = load_model(a.model);
  ReportOptions opts;
  opts.threshold = a.threshold;
  if (a.tise) {
    for (std::size_t i = 0; i < model.params.n(); ++i)
      for (std::size_t o = 0; o < model.params.m(); ++o) opts.tise_pairs.emplace_back(i, o);
  }
  const auto report = selection_report(model.params, opts);
  {
    Sink sink(a.output, out);
    *sink << report_to_json(report, model.params, model.feature_names, model.individuals, model.timepoints);
  }
  if (!a.csv.empty()) {
    Sink sink(a.csv, out);
    *sink << report_to_csv(report, model.params, model.feature_names);
  }
  return kExitOk;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const auto model = load_model(a.model);
  const auto table = read_long_csv(a.input);
  check_width(model, table.feature_names.size(), a.input);
  std::optional<SimTruth> truth;
  if (!a.truth.empty()) {
    truth = load_truth(a.truth);
    if (truth->informative_mask.size() != model.params.p())
      throw DataError("truth file has p = " + std::to_string(truth->informative_mask.size()) +
                      " but the model has p = " + std::to_string(model.params.p()));
  }

  std::vector<double> y, y_hat;
  for (const auto& row : table.rows) {
    y.push_back(row.y);
    y_hat.push_back(predict_labeled(model, row.id, row.time, row.x).value);
  }
  Sink sink(a.output, out);
  using nlohmann::json;
  auto emit = [&](const std::string& method, const std::vector<double>& pred,
                  const std::vector<std::size_t>& selected) {
    json row;
    row["method"] = method;
    row["n_test"] = y.size();
    row["r2"] = r_squared(y, pred);
    row["selected"] = selected.size();
    if (truth) {
      auto score = selection_score(selected, truth->informative_mask);
      row["fp"] = score.fp;
      row["fn"] = score.fn;
    }
    *sink << row.dump() << '\n';
  };

  ReportOptions ropts;
  ropts.threshold = a.threshold;
  emit("panelfm", y_hat, selection_report(model.params, ropts).selected);

  if (!a.lasso_train.empty()) {
    const auto train = load_dataset(a.lasso_train);
    check_width(model, train.p, a.lasso_train);
    LassoCvOptions copts;
    copts.seed = a.seed;
    copts.threads = a.threads;
    const auto cv = lasso_cv(train, copts);
    std::vector<double> pred;
    for (const auto& row : table.rows) pred.push_back(cv.fit.predict(row.x));
    emit("lasso", pred, cv.fit.support());
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse multi-level factor model for longitudinal panels"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic longitudinal dataset");
  simulate->add_option("--n", sim.cfg.n, "individuals")->capture_default_str();
  simulate->add_option("--m", sim.cfg.m, "time points per individual")->capture_default_str();
  simulate->add_option("--p", sim.cfg.p, "features")->capture_default_str();
  simulate->add_option("--n-fixed", sim.cfg.n_fixed, "informative fixed-effect variables")->capture_default_str();
  simulate->add_option("--n-random", sim.cfg.n_random, "informative random-effect variables")->capture_default_str();
  simulate->add_option("--correlation", sim.correlation, "lc, cc or multi")->capture_default_str();
  simulate->add_option("--noise-sd", sim.cfg.noise_sd)->capture_default_str();
  simulate->add_option("--effect-scale", sim.cfg.effect_scale)->capture_default_str();
  simulate->add_option("--random-effect-sd", sim.cfg.random_effect_sd)->capture_default_str();
  simulate->add_option("--keep-prob", sim.cfg.keep_probability, "record keep probability")->capture_default_str();
  simulate->add_option("--covariate-ar", sim.cfg.covariate_ar, "AR(1) coefficient of covariates")->capture_default_str();
  simulate->add_flag("--shared-random-columns", sim.cfg.shared_random_columns,
                     "multi: random columns vary by individual and by time point");
  simulate->add_option("--seed", sim.cfg.seed)->capture_default_str();
  simulate->add_option("--output", sim.output, "data CSV (training part when --test-output is set)")->required();
  simulate->add_option("--truth", sim.truth, "ground-truth JSON");
  simulate->add_option("--test-output", sim.test_output, "held-out CSV");
  simulate->add_option("--test-fraction", sim.test_fraction)->capture_default_str();
  simulate->add_option("--split", sim.split, "within or individual")->capture_default_str();

  FitArgs fit;
  auto* fitcmd = app.add_subcommand("fit", "fit a model by iterated conditional modes");
  fitcmd->add_option("--input", fit.input, "data CSV")->required();
  fitcmd->add_option("--output,--model", fit.output, "model JSON to write")->required();
  fitcmd->add_option("--alpha0", fit.hp.alpha0)->capture_default_str();
  fitcmd->add_option("--beta0", fit.hp.beta0)->capture_default_str();
  fitcmd->add_option("--b-mu0", fit.hp.b_mu0)->capture_default_str();
  fitcmd->add_option("--b-b0", fit.hp.b_b0)->capture_default_str();
  fitcmd->add_option("--max-sweeps", fit.hp.max_sweeps)->capture_default_str();
  fitcmd->add_option("--rel-tol", fit.hp.rel_tol)->capture_default_str();
  fitcmd->add_option("--b-floor", fit.hp.b_floor)->capture_default_str();
  fitcmd->add_option("--threads", fit.threads)->capture_default_str()->check(CLI::PositiveNumber);
  fitcmd->add_option("--seed", fit.seed)->capture_default_str();
  fitcmd->add_option("--diagnostics", fit.diagnostics, "per-sweep trace file ('-' for stderr)");

  PredictArgs pred;
  auto* predict = app.add_subcommand("predict", "predict outcomes for a long-format CSV");
  predict->add_option("--model", pred.model)->required();
  predict->add_option("--input", pred.input)->required();
  predict->add_option("--output", pred.output, "CSV (default stdout)");

  EffectsArgs eff;
  auto* effects = app.add_subcommand("effects", "random/fixed effects and selection report");
  effects->add_option("--model", eff.model)->required();
  effects->add_option("--output", eff.output, "JSON report (default stdout)");
  effects->add_option("--csv", eff.csv, "per-variable CSV table");
  effects->add_option("--threshold", eff.threshold, "minimum |beta| for a fixed effect")->capture_default_str();
  effects->add_flag("--tise", eff.tise, "include TISE vectors for every (individual, time point)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "held-out R^2 and selection errors");
  evaluate->add_option("--model", ev.model)->required();
  evaluate->add_option("--input", ev.input, "held-out CSV")->required();
  evaluate->add_option("--truth", ev.truth, "ground-truth JSON for fp/fn");
  evaluate->add_option("--output", ev.output, "JSON lines (default stdout)");
  evaluate->add_option("--threshold", ev.threshold)->capture_default_str();
  evaluate->add_option("--lasso-train", ev.lasso_train, "training CSV for a cross-validated LASSO baseline row");
  evaluate->add_option("--threads", ev.threads)->capture_default_str()->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", ev.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim, out);
    if (*fitcmd) return cmd_fit(fit, out, err);
    if (*predict) return cmd_predict(pred, out);
    if (*effects) return cmd_effects(eff, out);
    if (*evaluate) return cmd_evaluate(ev, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const UndefinedMetric& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace panelfm
