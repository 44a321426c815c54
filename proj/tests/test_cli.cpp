#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "balancetree/boost.hpp"
#include "balancetree/cli.hpp"
#include "balancetree/data.hpp"
#include "test_util.hpp"

using namespace balancetree;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "balancetree");
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    auto r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("simulate") != std::string::npos);
    r = run({"fit", "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--max-trees") != std::string::npos);
    r = run({"frobnicate"});
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown command 'frobnicate'") != std::string::npos);
    r = run({"fit"});
    CHECK(r.code == 2);
    r = run({"predict", "--model", "/nonexistent/model.json", "--points", "/nonexistent/p.csv", "--out", "x.csv"});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error: ", 0) == 0);
  }

  TEST_CASE("installed binary exit codes") {
    const std::string exe = BALANCETREE_CLI_PATH;
    CHECK(std::system((exe + " --help > /dev/null").c_str()) == 0);
    const int status = std::system((exe + " nope 2> /dev/null").c_str());
    CHECK(WEXITSTATUS(status) == 2);
  }

  TEST_CASE("simulate, fit, predict, evaluate") {
    testutil::TempDir dir("cli_roundtrip");
    const auto p = [&](const char* f) { return (dir.path() / f).string(); };
    auto r = run({"simulate", "--scenario", "GlobalShift2D", "--n0", "400", "--n1", "300", "--out0", p("s0.csv"),
                  "--out1", p("s1.csv"), "--truth", p("truth.csv"), "--seed", "3"});
    REQUIRE(r.code == 0);
    CHECK(read_csv(p("s0.csv")).rows() == 400);
    CHECK(read_csv(p("s1.csv")).rows() == 300);
    CHECK(read_csv(p("truth.csv")).rows() == 700);

    r = run({"fit", "--sample0", p("s0.csv"), "--sample1", p("s1.csv"), "--algo", "gb", "--max-trees", "60",
             "--nu", "0.1", "--cv-folds", "3", "--cv-curve", p("curve.csv"), "--out", p("model.json"), "--threads", "2"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("cv selected") != std::string::npos);
    const auto curve = read_csv(p("curve.csv"));
    CHECK(curve.rows() == 61);
    CHECK(curve(0, 0) == 2.0);
    const auto model = EnsembleModel::load(p("model.json"));
    CHECK(model.algorithm == Algorithm::gradient_boost);

    // Pooled points in group order, so evaluate can split them.
    const auto pooled = load_dataset(p("s0.csv"), p("s1.csv")).pooled();
    write_csv(p("points.csv"), pooled);
    r = run({"predict", "--model", p("model.json"), "--points", p("points.csv"), "--out", p("est.csv")});
    REQUIRE(r.code == 0);
    const auto est = read_csv(p("est.csv"));
    REQUIRE(est.rows() == 700);
    const auto direct = predict_log_ratio(model, pooled);
    for (std::size_t i = 0; i < 700; ++i) CHECK(est(i, 0) == direct[i]);

    r = run({"evaluate", "--truth", p("truth.csv"), "--est", p("est.csv"), "--n0", "400", "--n1", "300"});
    REQUIRE(r.code == 0);
    const double mse = std::stod(r.out);
    {
      std::ofstream zero(p("zero.csv"));
      for (int i = 0; i < 700; ++i) zero << "0\n";
    }
    r = run({"evaluate", "--truth", p("truth.csv"), "--est", p("zero.csv"), "--n0", "400", "--n1", "300"});
    REQUIRE(r.code == 0);
    CHECK(mse > 0.0);
    CHECK(mse < 0.5 * std::stod(r.out));

    r = run({"evaluate", "--truth", p("truth.csv"), "--est", p("est.csv"), "--n0", "400", "--n1", "299"});
    CHECK(r.code == 1);
  }

  TEST_CASE("identical seeds give identical files") {
    testutil::TempDir dir("cli_seed");
    const auto p = [&](const std::string& f) { return (dir.path() / f).string(); };
    for (const char* tag : {"a", "b"}) {
      const std::string t(tag);
      REQUIRE(run({"simulate", "--scenario", "LocalShift2D", "--n0", "200", "--n1", "200", "--out0", p(t + "0.csv"),
                   "--out1", p(t + "1.csv"), "--seed", "11"})
                  .code == 0);
      REQUIRE(run({"fit", "--sample0", p(t + "0.csv"), "--sample1", p(t + "1.csv"), "--algo", "fs", "--max-trees",
                   "30", "--cv-folds", "2", "--seed", "5", "--out", p(t + ".json")})
                  .code == 0);
      REQUIRE(run({"bayes", "--sample0", p(t + "0.csv"), "--sample1", p(t + "1.csv"), "--trees", "4", "--burnin",
                   "20", "--draws", "10", "--seed", "5", "--out", p(t + "_post.csv"), "--trace", p(t + "_tau.csv")})
                  .code == 0);
    }
    CHECK(slurp(p("a0.csv")) == slurp(p("b0.csv")));
    CHECK(slurp(p("a1.csv")) == slurp(p("b1.csv")));
    CHECK(slurp(p("a.json")) == slurp(p("b.json")));
    CHECK(slurp(p("a_post.csv")) == slurp(p("b_post.csv")));
    CHECK(slurp(p("a_tau.csv")) == slurp(p("b_tau.csv")));
  }

  TEST_CASE("posterior summary layout") {
    testutil::TempDir dir("cli_bayes");
    const auto p = [&](const char* f) { return (dir.path() / f).string(); };
    const auto data = testutil::shifted_pair(50, 40, 2, 1.0, 2);
    write_csv(p("s0.csv"), data.sample0());
    write_csv(p("s1.csv"), data.sample1());
    write_csv(p("eval.csv"), Sample(3, 2, {0.0, 0.0, 1.0, 1.0, -1.0, 2.0}));
    auto r = run({"bayes", "--sample0", p("s0.csv"), "--sample1", p("s1.csv"), "--trees", "6", "--burnin", "30",
                  "--draws", "40", "--quantiles", "0.1,0.5,0.9", "--eval-points", p("eval.csv"), "--out",
                  p("post.csv"), "--trace", p("tau.csv"), "--seed", "4"});
    REQUIRE(r.code == 0);
    const auto ls = lines(slurp(p("post.csv")));
    REQUIRE(ls.size() == 5);
    CHECK(ls[0] == "# seed=4 trees=6 lambda0=5 burnin=30 draws=40");
    CHECK(ls[1] == "point,mean,q0.1,q0.5,q0.9");
    for (std::size_t i = 2; i < 5; ++i) {
      CHECK(ls[i].rfind(std::to_string(i - 2) + ",", 0) == 0);
      std::istringstream row(ls[i]);
      std::vector<double> v;
      for (std::string cell; std::getline(row, cell, ',');) v.push_back(std::stod(cell));
      REQUIRE(v.size() == 5);
      CHECK(v[2] <= v[3]);
      CHECK(v[3] <= v[4]);
    }
    const auto tau = read_csv(p("tau.csv"));
    CHECK(tau.rows() == 40);
    for (std::size_t i = 0; i < tau.rows(); ++i) CHECK(tau(i, 0) > 0.0);

    r = run({"bayes", "--sample0", p("s0.csv"), "--sample1", p("s1.csv"), "--trees", "5", "--out", p("x.csv")});
    CHECK(r.code == 1);
    CHECK(r.err.find("even") != std::string::npos);
  }

  TEST_CASE("config file fills flags that were not given") {
    testutil::TempDir dir("cli_config");
    const auto p = [&](const char* f) { return (dir.path() / f).string(); };
    {
      std::ofstream cfg(p("cfg.json"));
      cfg << R"({"scenario": "GlobalShift2D", "n0": 25, "n1": 35, "seed": 8, "null": true})";
    }
    auto r = run({"simulate", "--config", p("cfg.json"), "--n1", "15", "--out0", p("a0.csv"), "--out1", p("a1.csv"),
                  "--truth", p("t.csv")});
    REQUIRE(r.code == 0);
    CHECK(read_csv(p("a0.csv")).rows() == 25);
    CHECK(read_csv(p("a1.csv")).rows() == 15);
    const auto truth = read_csv(p("t.csv"));
    for (std::size_t i = 0; i < truth.rows(); ++i) CHECK(truth(i, 0) == 0.0);

    {
      std::ofstream bad(p("bad.json"));
      bad << "[1, 2]";
    }
    r = run({"simulate", "--config", p("bad.json"), "--n0", "5", "--n1", "5", "--out0", p("b0.csv"), "--out1",
             p("b1.csv")});
    CHECK(r.code == 2);
  }

  TEST_CASE("bench rows and CSV") {
    testutil::TempDir dir("cli_bench");
    const auto csv = (dir.path() / "results.csv").string();
    auto r = run({"bench", "--scenarios", "GlobalShift2D,LocalDispersion2D", "--sizes", "120x80,60x140", "--methods",
                  "fs,gb,bayes", "--replicates", "2", "--max-trees", "20", "--cv-folds", "2", "--trees", "4",
                  "--burnin", "10", "--draws", "10", "--seed", "1", "--out", csv});
    REQUIRE(r.code == 0);
    const auto ls = lines(slurp(csv));
    REQUIRE(ls.size() == 1 + 2 * 2 * 3);
    CHECK(ls[0] == "scenario,size,method,mean_mse,se_mse,replicates,seed");
    CHECK(ls[1].rfind("GlobalShift2D,120x80,fs,", 0) == 0);

    BenchConfig bc;
    bc.scenarios = {ScenarioKind::global_shift_2d, ScenarioKind::local_dispersion_2d};
    bc.sizes = {parse_bench_size("120x80"), parse_bench_size("60x140")};
    bc.replicates = 2;
    bc.seed = 1;
    bc.boost.max_trees = 20;
    bc.boost.cv_folds = 2;
    bc.gibbs.trees = 4;
    bc.gibbs.burn_in = 10;
    bc.gibbs.draws = 10;
    const auto rows = run_bench(bc);
    REQUIRE(rows.size() == 12);
    std::ostringstream again;
    write_bench_csv(again, rows);
    CHECK(again.str() == slurp(csv));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::istringstream row(ls[i + 1]);
      std::vector<std::string> cells;
      for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
      REQUIRE(cells.size() == 7);
      CHECK(std::stod(cells[3]) == rows[i].mean_mse);
      CHECK(std::stod(cells[4]) == rows[i].se_mse);
      CHECK(rows[i].mse.size() == 2);
    }

    CHECK(parse_bench_size("balanced").n0 == 5000);
    CHECK(parse_bench_size("unbalanced").n1 == 1000);
    CHECK_THROWS(parse_bench_size("12by4"));
  }
}
