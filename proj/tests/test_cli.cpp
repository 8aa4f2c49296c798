#include "panelfm/cli.hpp"
#include "panelfm/model.hpp"
#include "panelfm/simulator.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace panelfm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "panelfm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("panelfm_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("simulate writes a balanced panel") {
  TempDir dir;
  auto r = cli({"simulate", "--n", "40", "--m", "40", "--p", "100", "--correlation", "multi", "--seed", "1",
                "--output", dir / "d.csv", "--truth", dir / "t.json"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("records=1600") != std::string::npos);
  CHECK(line_count(slurp(dir / "d.csv")) == 1601);

  auto lc = cli({"simulate", "--p", "20", "--correlation", "lc", "--output", dir / "lc.csv", "--truth",
                 dir / "lc.json"});
  REQUIRE(lc.code == 0);
  CHECK(load_truth(dir / "lc.json").gamma_O_true.isZero(0.0));
}

TEST_CASE("usage errors") {
  TempDir dir;
  auto bad = cli({"simulate", "--correlation", "weird", "--output", dir / "x.csv"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("lc, cc, multi") != std::string::npos);
  CHECK(cli({}).code == 1);
  CHECK(cli({"fit"}).code == 1);
  CHECK(cli({"fit", "--input", "a.csv", "--output", "b.json", "--threads", "0"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("data errors name the path") {
  auto r = cli({"fit", "--input", "/nonexistent/input.csv", "--output", "/tmp/never.json"});
  CHECK(r.code == 2);
  CHECK(r.err.find("/nonexistent/input.csv") != std::string::npos);

  TempDir dir;
  {
    std::ofstream f(dir / "dup.csv");
    f << "id,time,y,x1\na,1,0,1\na,1,1,2\n";
  }
  auto d = cli({"fit", "--input", dir / "dup.csv", "--output", dir / "m.json"});
  CHECK(d.code == 2);
  CHECK(d.err.find("row 3") != std::string::npos);
}

TEST_CASE("fit, predict, effects, evaluate") {
  TempDir dir;
  REQUIRE(cli({"simulate", "--n", "40", "--m", "40", "--p", "20", "--seed", "4", "--output", dir / "train.csv",
               "--test-output", dir / "test.csv", "--truth", dir / "truth.json"})
              .code == 0);
  auto f = cli({"fit", "--input", dir / "train.csv", "--output", dir / "model.json", "--diagnostics",
                dir / "diag.tsv"});
  REQUIRE(f.code == 0);
  CHECK(f.out.find("converged=true") != std::string::npos);

  // Diagnostics trace is monotone.
  std::istringstream diag(slurp(dir / "diag.tsv"));
  std::string line;
  std::getline(diag, line);
  CHECK(line == "sweep\tlog_posterior\trel_change\tactive_I\tactive_O");
  double prev = -1e300;
  int rows = 0;
  while (std::getline(diag, line)) {
    std::istringstream ls(line);
    int sweep;
    double lp;
    ls >> sweep >> lp;
    CHECK(lp >= prev - 1e-9 * std::abs(prev));
    prev = lp;
    ++rows;
  }
  CHECK(rows > 0);

  auto p = cli({"predict", "--model", dir / "model.json", "--input", dir / "test.csv"});
  REQUIRE(p.code == 0);
  CHECK(p.out.rfind("id,time,y,y_pred,route\n", 0) == 0);
  CHECK(p.out.find(",seen\n") != std::string::npos);

  auto e = cli({"effects", "--model", dir / "model.json", "--csv", dir / "eff.csv"});
  REQUIRE(e.code == 0);
  auto report = nlohmann::json::parse(e.out);
  CHECK(report.contains("correlation_verdict"));
  CHECK(slurp(dir / "eff.csv").rfind("variable,fixed_mask,beta,b_I,b_O,selected\n", 0) == 0);

  auto ev = cli({"evaluate", "--model", dir / "model.json", "--input", dir / "test.csv", "--truth",
                 dir / "truth.json", "--lasso-train", dir / "train.csv"});
  REQUIRE(ev.code == 0);
  std::istringstream lines(ev.out);
  std::getline(lines, line);
  auto row = nlohmann::json::parse(line);
  CHECK(row["method"] == "panelfm");
  CHECK(row["r2"].get<double>() > 0.5);
  CHECK(row.contains("fp"));
  std::getline(lines, line);
  CHECK(nlohmann::json::parse(line)["method"] == "lasso");

  // Width mismatch between model and data.
  REQUIRE(cli({"simulate", "--p", "12", "--n", "3", "--m", "3", "--output", dir / "narrow.csv"}).code == 0);
  auto mm = cli({"predict", "--model", dir / "model.json", "--input", dir / "narrow.csv"});
  CHECK(mm.code == 2);
  CHECK(mm.err.find("p = 12") != std::string::npos);
}

TEST_CASE("max sweeps zero writes the initialization and reports non-convergence") {
  TempDir dir;
  REQUIRE(cli({"simulate", "--n", "5", "--m", "5", "--p", "10", "--output", dir / "d.csv"}).code == 0);
  auto r = cli({"fit", "--input", dir / "d.csv", "--output", dir / "m.json", "--max-sweeps", "0", "--alpha0", "3",
                "--beta0", "2"});
  CHECK(r.code == 0);
  auto m = load_model(dir / "m.json");
  CHECK(m.params.theta_I.isZero(0.0));
  CHECK(m.params.theta_O.isZero(0.0));
  CHECK(m.params.mu_I.isZero(0.0));
  CHECK((m.params.b_O.array() == 1.0).all());
  CHECK(m.params.alpha == 1.5);

  auto few = cli({"fit", "--input", dir / "d.csv", "--output", dir / "m2.json", "--max-sweeps", "1"});
  CHECK(few.code == 3);
}

TEST_CASE("routing of unseen labels and all-zero model") {
  TempDir dir;
  Model model;
  model.params = ModelParams::initial(1, 1, 2, HyperPriors{});
  model.params.theta_I.row(0) << 1, 1;
  model.params.theta_O.row(0) << 2, 0;
  model.params.mu_I << 1, 1;
  model.individuals.intern("a");
  model.timepoints.intern("t");
  model.feature_names = {"x1", "x2"};
  save_model(dir / "m.json", model);
  {
    std::ofstream f(dir / "q.csv");
    f << "id,time,y,x1,x2\na,t,5,1,0\nnew,t,5,1,0\nnew,u,0,1,0\n";
  }
  auto r = cli({"predict", "--model", dir / "m.json", "--input", dir / "q.csv"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("a,t,5,5,seen\n") != std::string::npos);
  CHECK(r.out.find("new,t,5,5,unseen_individual\n") != std::string::npos);
  CHECK(r.out.find("new,u,0,1,unseen_both\n") != std::string::npos);

  // Both rows are predicted exactly: (a, t2) has an unseen time point and
  // mu_O = 0, so the prediction is x'theta_i = 1.
  {
    std::ofstream f(dir / "perfect.csv");
    f << "id,time,y,x1,x2\na,t,5,1,0\na,t2,1,0,1\n";
  }
  {
    std::ofstream f(dir / "truth.json");
    f << R"({"beta_true":[0,0],"informative_mask":[true,true]})";
  }
  auto ev = cli({"evaluate", "--model", dir / "m.json", "--input", dir / "perfect.csv", "--truth", dir / "truth.json"});
  REQUIRE(ev.code == 0);
  auto row = nlohmann::json::parse(ev.out);
  CHECK(row["r2"] == 1.0);
  CHECK(row["fp"] == 0);
  CHECK(row["fn"] == 0);

  Model zero;
  zero.params = ModelParams::initial(2, 2, 3, HyperPriors{});
  zero.individuals = LabelIndex::from_labels({"a", "b"});
  zero.timepoints = LabelIndex::from_labels({"s", "t"});
  save_model(dir / "z.json", zero);
  auto e = cli({"effects", "--model", dir / "z.json"});
  REQUIRE(e.code == 0);
  auto rep = nlohmann::json::parse(e.out);
  CHECK(rep["correlation_verdict"] == "none");
  CHECK(rep["selected"].empty());
}
