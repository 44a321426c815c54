#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "balancetree/data.hpp"
#include "balancetree/kernels.hpp"
#include "balancetree/loss.hpp"
#include "balancetree/tree.hpp"

namespace balancetree {

enum class Algorithm {
  forward_stagewise,  // "fs"
  gradient_boost,     // "gb"
};

std::string_view to_string(Algorithm algo);
Algorithm parse_algorithm(std::string_view name);

struct BoostConfig {
  Algorithm algorithm = Algorithm::forward_stagewise;
  int max_trees = 1000;
  int max_depth = 4;
  double learning_rate = 0.01;
  int cv_folds = 5;
  int min_leaf_total = 5;
  std::uint64_t seed = 0;
  Execution execution = Execution::parallel;

  void validate() const;
};

/// log w(x) = offset + learning_rate * sum_k f_k(x), where f_k is the k-th
/// tree and offset accumulates the log rebalancing constants.
struct EnsembleModel {
  Algorithm algorithm = Algorithm::forward_stagewise;
  double learning_rate = 0.01;
  double offset = 0.0;
  std::vector<DecisionTree> trees;
  CutGrid grid;
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return grid.dim(); }

  nlohmann::json to_json() const;
  static EnsembleModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static EnsembleModel load(const std::filesystem::path& path);
};

struct FitResult {
  EnsembleModel model;
  BalanceState state;
  /// Training l_n before the first tree and after every iteration.
  std::vector<double> train_loss;
};

/// Incremental learner: one call to step() adds one tree, then rebalances.
class Booster {
 public:
  Booster(const TwoSampleDataset& data, const CutGrid& grid, const BoostConfig& config);

  /// Grows tree k+1, applies it with shrinkage and rebalances. Returns the tree.
  const DecisionTree& step();

  const EnsembleModel& model() const { return model_; }
  const BalanceState& state() const { return state_; }
  /// log c applied after the most recent step.
  double last_log_rebalance() const { return last_log_c_; }
  double training_loss() const { return finite_sample_loss(state_); }

  EnsembleModel release_model() && { return std::move(model_); }
  BalanceState release_state() && { return std::move(state_); }

 private:
  DecisionTree grow_tree(std::vector<int>& leaf0, std::vector<int>& leaf1);

  const TwoSampleDataset& data_;
  BoostConfig config_;
  BinnedData bins_;
  EnsembleModel model_;
  BalanceState state_;
  double last_log_c_ = 0.0;
};

/// Forward-stagewise fit of config.max_trees trees.
FitResult fit_forward_stagewise(const TwoSampleDataset& data, const CutGrid& grid,
                                BoostConfig config);
/// Gradient-boosting fit of config.max_trees trees.
FitResult fit_gradient_boost(const TwoSampleDataset& data, const CutGrid& grid, BoostConfig config);
/// Dispatches on config.algorithm.
FitResult fit_ensemble(const TwoSampleDataset& data, const CutGrid& grid, const BoostConfig& config);

struct CvResult {
  int best_trees = 0;
  /// Fold-averaged held-out l_n for 0..max_trees trees.
  std::vector<double> curve;
};

/// Stratified k-fold selection of the tree count minimizing held-out l_n.
CvResult select_tree_count_cv(const TwoSampleDataset& data, const CutGrid& grid,
                              const BoostConfig& config);

/// Cross-validates the tree count, then refits on all data with that many trees.
FitResult fit_with_cv(const TwoSampleDataset& data, const CutGrid& grid, const BoostConfig& config,
                      CvResult* cv_out = nullptr);

/// log w at each row of points.
std::vector<double> predict_log_weight(const EnsembleModel& model, const Sample& points,
                                       Execution exec = Execution::parallel);
/// log r = 2 log w at each row of points.
std::vector<double> predict_log_ratio(const EnsembleModel& model, const Sample& points,
                                      Execution exec = Execution::parallel);

}  // namespace balancetree
