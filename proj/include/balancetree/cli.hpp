#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "balancetree/boost.hpp"
#include "balancetree/gibbs.hpp"
#include "balancetree/simgen.hpp"

namespace balancetree {

struct BenchSize {
  std::string label;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
};

/// "balanced" (5000/5000), "unbalanced" (9000/1000) or "<n0>x<n1>".
BenchSize parse_bench_size(const std::string& text);

struct BenchConfig {
  std::vector<ScenarioKind> scenarios{ScenarioKind::global_shift_2d};
  std::vector<BenchSize> sizes{{"balanced", 5000, 5000}};
  std::vector<std::string> methods{"fs", "gb", "bayes"};
  int replicates = 5;
  std::uint64_t seed = 0;
  bool null_effect = false;
  int cuts_per_dim = CutGrid::kDefaultCount;
  BoostConfig boost;
  GibbsConfig gibbs;
};

struct BenchRow {
  std::string scenario;
  std::string size;
  std::string method;
  double mean_mse = 0.0;
  double se_mse = 0.0;
  int replicates = 0;
  std::uint64_t seed = 0;
  /// Per-replicate values, replicate order.
  std::vector<double> mse;
};

/// Replicate r draws its data with seed + r; the 20D loadings use `seed`.
std::vector<BenchRow> run_bench(const BenchConfig& config);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);
void print_bench_table(std::ostream& out, const std::vector<BenchRow>& rows);

/// Entry point of the command-line tool. Returns the process exit code.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace balancetree
