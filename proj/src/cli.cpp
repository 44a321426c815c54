#include "balancetree/cli.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "balancetree/error.hpp"

namespace balancetree {

BenchSize parse_bench_size(const std::string& text) {
  if (text == "balanced") return {text, 5000, 5000};
  if (text == "unbalanced") return {text, 9000, 1000};
  const auto x = text.find('x');
  if (x != std::string::npos) {
    try {
      std::size_t used0 = 0;
      std::size_t used1 = 0;
      const auto n0 = std::stoull(text.substr(0, x), &used0);
      const auto n1 = std::stoull(text.substr(x + 1), &used1);
      if (used0 == x && used1 == text.size() - x - 1 && n0 > 0 && n1 > 0) return {text, n0, n1};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("bad size '" + text + "' (expected balanced, unbalanced or <n0>x<n1>)");
}

namespace {

std::vector<double> fit_and_predict(const std::string& method, const TwoSampleDataset& data, const CutGrid& grid,
                                    const BenchConfig& config, std::uint64_t seed) {
  if (method == "fs" || method == "gb") {
    BoostConfig bc = config.boost;
    bc.algorithm = parse_algorithm(method);
    bc.seed = seed;
    bc.execution = Execution::serial;
    const FitResult fit = fit_with_cv(data, grid, bc);
    return predict_log_ratio(fit.model, data.pooled(), Execution::serial);
  }
  if (method == "bayes") {
    GibbsConfig gc = config.gibbs;
    gc.seed = seed;
    gc.keep_draws = false;
    return run_sampler(data, grid, gc).mean_log_ratio;
  }
  throw ConfigError("unknown method '" + method + "' (expected fs, gb or bayes)");
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& config) {
  if (config.replicates < 1) throw ConfigError("replicates must be >= 1");
  for (const auto& m : config.methods) {
    if (m != "fs" && m != "gb" && m != "bayes") throw ConfigError("unknown method '" + m + "'");
  }
  std::vector<BenchRow> rows;
  for (ScenarioKind kind : config.scenarios) {
    const Scenario scenario = make_scenario(kind, config.seed, config.null_effect);
    for (const BenchSize& size : config.sizes) {
      const auto reps = static_cast<std::size_t>(config.replicates);
      const std::size_t methods = config.methods.size();
      std::vector<double> mse(reps * methods, 0.0);
      std::vector<std::exception_ptr> errors(reps);
#pragma omp parallel for schedule(dynamic)
      for (long r = 0; r < static_cast<long>(reps); ++r) {
        try {
          const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(r);
          const TwoSampleDataset data = generate(scenario, size.n0, size.n1, seed);
          const CutGrid grid = build_cut_grid(data, config.cuts_per_dim);
          const std::vector<double> truth = true_log_ratio(scenario, data.pooled());
          for (std::size_t m = 0; m < methods; ++m) {
            const auto est = fit_and_predict(config.methods[m], data, grid, config, seed);
            mse[static_cast<std::size_t>(r) * methods + m] = symmetrized_mse(truth, est, data.n0(), data.n1());
          }
        } catch (const std::exception& e) {
          errors[static_cast<std::size_t>(r)] =
              std::make_exception_ptr(Error("replicate " + std::to_string(r) + ": " + e.what()));
        }
      }
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
      for (std::size_t m = 0; m < methods; ++m) {
        BenchRow row;
        row.scenario = std::string(to_string(kind));
        row.size = size.label;
        row.method = config.methods[m];
        row.replicates = config.replicates;
        row.seed = config.seed;
        for (std::size_t r = 0; r < reps; ++r) row.mse.push_back(mse[r * methods + m]);
        double sum = 0.0;
        for (double v : row.mse) sum += v;
        row.mean_mse = sum / static_cast<double>(reps);
        if (reps > 1) {
          double ss = 0.0;
          for (double v : row.mse) ss += (v - row.mean_mse) * (v - row.mean_mse);
          row.se_mse = std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps));
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "scenario,size,method,mean_mse,se_mse,replicates,seed\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.size << ',' << r.method << ',' << format_double(r.mean_mse) << ','
        << format_double(r.se_mse) << ',' << r.replicates << ',' << r.seed << '\n';
  }
}

void print_bench_table(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << std::left << std::setw(22) << "scenario" << std::setw(12) << "size" << std::setw(8) << "method"
      << "MSE (SE)\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(22) << r.scenario << std::setw(12) << r.size << std::setw(8) << r.method
        << format_double(r.mean_mse) << " (" << format_double(r.se_mse) << ")\n";
  }
}

namespace {

// Appends "--key value" for every config-file entry the command line does not
// already set, so that explicit flags win.
std::vector<std::string> merge_config_file(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
  auto given = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  auto scalar = [](const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return format_double(v.get<double>());
    return v.dump();
  };
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + scalar(v);
      args.push_back(flag);
      args.push_back(joined);
    } else {
      args.push_back(flag);
      args.push_back(scalar(value));
    }
  }
  return args;
}

void set_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("BATTS_THREADS")) {
      try {
        threads = std::stoi(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("BATTS_THREADS is not an integer: ") + env);
      }
    }
  }
  if (threads > 0) omp_set_num_threads(threads);
}

void write_column(const std::string& path, const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (double v : values) out << format_double(v) << '\n';
  if (!out) throw DataError("write failed for " + path);
}

std::vector<double> read_column(const std::string& path) {
  const Sample s = read_csv(path);
  if (s.cols() != 1) throw DataError(path + ": expected a single column, found " + std::to_string(s.cols()));
  return {s.values().begin(), s.values().end()};
}

struct DataFlags {
  std::string sample0;
  std::string sample1;
  int cuts = CutGrid::kDefaultCount;

  void add(CLI::App* app) {
    app->add_option("--sample0", sample0, "CSV of sample 0 (numerator density)")->required();
    app->add_option("--sample1", sample1, "CSV of sample 1 (denominator density)")->required();
    app->add_option("--cuts-per-dim", cuts, "Equally spaced candidate cuts per dimension")->capture_default_str();
  }
};

void add_boost_flags(CLI::App* app, BoostConfig& c) {
  app->add_option("--max-trees", c.max_trees, "Largest number of trees considered by CV")->capture_default_str();
  app->add_option("--depth", c.max_depth, "Maximum tree depth")->capture_default_str();
  app->add_option("--nu", c.learning_rate, "Learning rate")->capture_default_str();
  app->add_option("--cv-folds", c.cv_folds, "Cross-validation folds")->capture_default_str();
  app->add_option("--min-leaf", c.min_leaf_total, "Minimum pooled observations per leaf")->capture_default_str();
}

void add_gibbs_flags(CLI::App* app, GibbsConfig& c) {
  app->add_option("--trees", c.trees, "Number of trees K (even)")->capture_default_str();
  app->add_option("--lambda0", c.lambda0, "Leaf prior scale; lambda = lambda0 * K")->capture_default_str();
  app->add_option("--burnin", c.burn_in, "Burn-in sweeps")->capture_default_str();
  app->add_option("--draws", c.draws, "Recorded posterior draws")->capture_default_str();
  app->add_option("--thin", c.thin, "Sweeps between recorded draws")->capture_default_str();
  app->add_option("--alpha", c.tree_prior.a, "Tree prior split scale a")->capture_default_str();
  app->add_option("--beta", c.tree_prior.b, "Tree prior depth decay b")->capture_default_str();
  app->add_option("--a0-tau", c.a0_tau, "Gamma prior shape of tau")->capture_default_str();
  app->add_option("--b0-tau", c.b0_tau, "Gamma prior rate of tau")->capture_default_str();
  app->add_option("--p-grow", c.move_probs.grow, "GROW proposal probability")->capture_default_str();
  app->add_option("--p-prune", c.move_probs.prune, "PRUNE proposal probability")->capture_default_str();
  app->add_option("--p-change", c.move_probs.change, "CHANGE proposal probability")->capture_default_str();
}

}  // namespace

int dispatch(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  static const std::vector<std::string> kCommands = {"fit", "bayes", "predict", "simulate", "evaluate", "bench"};
  if (raw_args.size() > 1 && !raw_args[1].empty() && raw_args[1][0] != '-' &&
      std::find(kCommands.begin(), kCommands.end(), raw_args[1]) == kCommands.end()) {
    err << "error: unknown command '" << raw_args[1] << "'\n";
    return 2;
  }

  CLI::App app{"Two-sample density-ratio estimation with additive trees under the balancing loss"};
  app.require_subcommand(1);
  int threads = 0;
  std::string config_path;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file of flag values; explicit flags take precedence");
    sub->add_option("--threads", threads, "Worker threads (default: BATTS_THREADS, else all cores)");
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
  };

  // fit
  auto* fit = app.add_subcommand("fit", "Fit an FS or GB ensemble with CV-selected tree count");
  DataFlags fit_data;
  BoostConfig boost;
  std::string algo = "fs";
  std::string model_out;
  std::string curve_out;
  bool no_cv = false;
  fit_data.add(fit);
  fit->add_option("--algo", algo, "Learner: fs (forward-stagewise) or gb (gradient boosting)")
      ->check(CLI::IsMember({"fs", "gb"}))
      ->capture_default_str();
  add_boost_flags(fit, boost);
  fit->add_flag("--no-cv", no_cv, "Use --max-trees directly instead of cross-validation");
  fit->add_option("--cv-curve", curve_out, "Write the fold-averaged held-out loss per tree count");
  fit->add_option("--out", model_out, "Model JSON output")->required();
  common(fit);

  // predict
  auto* predict = app.add_subcommand("predict", "Evaluate log r of a fitted model at points");
  std::string model_in;
  std::string points_in;
  std::string predict_out;
  predict->add_option("--model", model_in, "Model JSON")->required();
  predict->add_option("--points", points_in, "CSV of evaluation points")->required();
  predict->add_option("--out", predict_out, "Output CSV, one log ratio per row")->required();
  common(predict);

  // bayes
  auto* bayes = app.add_subcommand("bayes", "Posterior sampling of log r with Bayesian additive trees");
  DataFlags bayes_data;
  GibbsConfig gibbs;
  std::string eval_in;
  std::vector<double> quantiles{0.025, 0.975};
  std::string posterior_out;
  std::string trace_out;
  bayes_data.add(bayes);
  add_gibbs_flags(bayes, gibbs);
  bayes->add_option("--eval-points", eval_in, "CSV of evaluation points (default: sample 0 then sample 1)");
  bayes->add_option("--quantiles", quantiles, "Posterior quantile levels")->delimiter(',')->capture_default_str();
  bayes->add_option("--out", posterior_out, "Posterior summary CSV")->required();
  bayes->add_option("--trace", trace_out, "Per-draw tau CSV");
  common(bayes);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Draw a two-sample data set from a scenario");
  std::string scenario_name;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  std::string out0;
  std::string out1;
  std::string truth_out;
  bool null_effect = false;
  simulate->add_option("--scenario", scenario_name, "GlobalShift2D, LocalShift2D, LocalDispersion2D, "
                                                    "LatentLocation20D or LatentDispersion20D")
      ->required();
  simulate->add_option("--n0", n0, "Sample 0 size")->required();
  simulate->add_option("--n1", n1, "Sample 1 size")->required();
  simulate->add_option("--out0", out0, "Sample 0 CSV")->required();
  simulate->add_option("--out1", out1, "Sample 1 CSV")->required();
  simulate->add_option("--truth", truth_out, "True log r at sample 0 then sample 1");
  simulate->add_flag("--null", null_effect, "Give both groups the sample-0 distribution");
  common(simulate);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Symmetrized MSE between true and estimated log r");
  std::string truth_in;
  std::string est_in;
  evaluate->add_option("--truth", truth_in, "True log r CSV")->required();
  evaluate->add_option("--est", est_in, "Estimated log r CSV")->required();
  evaluate->add_option("--n0", n0, "Leading rows that belong to sample 0")->required();
  evaluate->add_option("--n1", n1, "Trailing rows that belong to sample 1")->required();
  common(evaluate);

  // bench
  auto* bench = app.add_subcommand("bench", "Replicated simulation benchmark");
  BenchConfig bc;
  std::vector<std::string> bench_scenarios{"GlobalShift2D"};
  std::vector<std::string> bench_sizes{"balanced"};
  std::string bench_out = "results.csv";
  bench->add_option("--scenarios", bench_scenarios, "Scenario names")->delimiter(',')->capture_default_str();
  bench->add_option("--sizes", bench_sizes, "balanced (5000/5000), unbalanced (9000/1000) or <n0>x<n1>")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--methods", bc.methods, "fs, gb, bayes")->delimiter(',')->capture_default_str();
  bench->add_option("--replicates", bc.replicates, "Replicates; replicate r uses seed + r")->capture_default_str();
  bench->add_option("--cuts-per-dim", bc.cuts_per_dim, "Candidate cuts per dimension")->capture_default_str();
  bench->add_flag("--null", bc.null_effect, "Give both groups the sample-0 distribution");
  add_boost_flags(bench, bc.boost);
  add_gibbs_flags(bench, bc.gibbs);
  bench->add_option("--out", bench_out, "Results CSV")->capture_default_str();
  common(bench);

  std::vector<std::string> args;
  try {
    args = merge_config_file(raw_args);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    // Subcommand help is raised as CallForHelp from the subcommand.
    if (e.get_exit_code() == 0) {
      for (auto* sub : app.get_subcommands()) out << sub->help();
      if (app.get_subcommands().empty()) out << app.help();
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    set_threads(threads);
    if (fit->parsed()) {
      const TwoSampleDataset data = load_dataset(fit_data.sample0, fit_data.sample1);
      const CutGrid grid = build_cut_grid(data, fit_data.cuts);
      boost.algorithm = parse_algorithm(algo);
      boost.seed = seed;
      FitResult result;
      if (no_cv) {
        result = fit_ensemble(data, grid, boost);
      } else {
        CvResult cv;
        result = fit_with_cv(data, grid, boost, &cv);
        if (!curve_out.empty()) write_column(curve_out, cv.curve);
        out << "cv selected " << cv.best_trees << " trees\n";
      }
      result.model.save(model_out);
      out << "training loss " << format_double(result.train_loss.back()) << '\n';
    } else if (predict->parsed()) {
      const EnsembleModel model = EnsembleModel::load(model_in);
      const Sample points = read_csv(points_in);
      write_column(predict_out, predict_log_ratio(model, points));
    } else if (bayes->parsed()) {
      const TwoSampleDataset data = load_dataset(bayes_data.sample0, bayes_data.sample1);
      const CutGrid grid = build_cut_grid(data, bayes_data.cuts);
      gibbs.seed = seed;
      Sample eval;
      if (!eval_in.empty()) eval = read_csv(eval_in);
      const PosteriorDraws draws = run_sampler(data, grid, gibbs, eval_in.empty() ? nullptr : &eval);
      const PosteriorSummary summary = summarize(draws, quantiles);
      std::ofstream pf(posterior_out);
      if (!pf) throw DataError("cannot write " + posterior_out);
      pf << "# seed=" << seed << " trees=" << gibbs.trees << " lambda0=" << format_double(gibbs.lambda0)
         << " burnin=" << gibbs.burn_in << " draws=" << gibbs.draws << '\n';
      pf << "point,mean";
      for (double q : quantiles) pf << ",q" << format_double(q);
      pf << '\n';
      for (std::size_t p = 0; p < draws.points; ++p) {
        pf << p << ',' << format_double(summary.mean[p]);
        for (std::size_t q = 0; q < quantiles.size(); ++q) {
          pf << ',' << format_double(summary.quantiles[p * quantiles.size() + q]);
        }
        pf << '\n';
      }
      if (!trace_out.empty()) write_column(trace_out, draws.tau_draws);
    } else if (simulate->parsed()) {
      const Scenario scenario = make_scenario(parse_scenario(scenario_name), seed, null_effect);
      const TwoSampleDataset data = generate(scenario, n0, n1, seed);
      write_csv(out0, data.sample0());
      write_csv(out1, data.sample1());
      if (!truth_out.empty()) write_column(truth_out, true_log_ratio(scenario, data.pooled()));
    } else if (evaluate->parsed()) {
      const auto truth = read_column(truth_in);
      const auto est = read_column(est_in);
      out << format_double(symmetrized_mse(truth, est, n0, n1)) << '\n';
    } else if (bench->parsed()) {
      bc.scenarios.clear();
      for (const auto& s : bench_scenarios) bc.scenarios.push_back(parse_scenario(s));
      bc.sizes.clear();
      for (const auto& s : bench_sizes) bc.sizes.push_back(parse_bench_size(s));
      bc.seed = seed;
      const auto rows = run_bench(bc);
      std::ofstream rf(bench_out);
      if (!rf) throw DataError("cannot write " + bench_out);
      write_bench_csv(rf, rows);
      print_bench_table(out, rows);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace balancetree
