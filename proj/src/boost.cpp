#include "balancetree/boost.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>

#include "balancetree/error.hpp"

namespace balancetree {

std::string_view to_string(Algorithm algo) {
  return algo == Algorithm::forward_stagewise ? "fs" : "gb";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "fs") return Algorithm::forward_stagewise;
  if (name == "gb") return Algorithm::gradient_boost;
  throw ConfigError("unknown algorithm '" + std::string(name) + "' (expected fs or gb)");
}

void BoostConfig::validate() const {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("learning rate must lie in (0, 1]");
  if (max_depth < 1) throw ConfigError("max depth must be >= 1");
  if (max_trees < 0) throw ConfigError("max trees must be >= 0");
  if (cv_folds < 2) throw ConfigError("cv folds must be >= 2");
  if (min_leaf_total < 1) throw ConfigError("min leaf total must be >= 1");
}

nlohmann::json EnsembleModel::to_json() const {
  nlohmann::json j;
  j["algorithm"] = std::string(to_string(algorithm));
  j["nu"] = learning_rate;
  j["offset"] = offset;
  j["seed"] = seed;
  j["cut_grid"] = grid.all();
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& t : trees) ts.push_back(t.to_json());
  j["trees"] = std::move(ts);
  return j;
}

EnsembleModel EnsembleModel::from_json(const nlohmann::json& j) {
  EnsembleModel m;
  try {
    m.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    m.learning_rate = j.at("nu").get<double>();
    m.offset = j.at("offset").get<double>();
    m.seed = j.value("seed", std::uint64_t{0});
    m.grid = CutGrid(j.at("cut_grid").get<std::vector<std::vector<double>>>());
    for (const auto& t : j.at("trees")) m.trees.push_back(DecisionTree::from_json(t, m.grid.dim()));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model: ") + e.what());
  }
  return m;
}

void EnsembleModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json().dump(1) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

EnsembleModel EnsembleModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

Booster::Booster(const TwoSampleDataset& data, const CutGrid& grid, const BoostConfig& config)
    : data_(data), config_(config), bins_(data, grid), state_(data.n0(), data.n1()) {
  config_.validate();
  if (grid.dim() != data.dim()) throw DataError("cut grid dimension does not match the data");
  model_.algorithm = config_.algorithm;
  model_.learning_rate = config_.learning_rate;
  model_.grid = grid;
  model_.seed = config_.seed;
}

DecisionTree Booster::grow_tree(std::vector<int>& leaf0, std::vector<int>& leaf1) {
  const std::size_t n0 = data_.n0();
  const std::size_t n1 = data_.n1();
  const CutGrid& grid = model_.grid;
  const auto criterion = config_.algorithm == Algorithm::forward_stagewise ? SplitCriterion::affinity
                                                                          : SplitCriterion::variance;
  std::vector<double> mass0(state_.inv_w0().begin(), state_.inv_w0().end());
  std::vector<double> mass1(state_.w1().begin(), state_.w1().end());
  for (double& m : mass0) m /= static_cast<double>(n0);
  for (double& m : mass1) m /= static_cast<double>(n1);

  DecisionTree tree(data_.dim());
  std::vector<int> slot0(n0, 0);
  std::vector<int> slot1(n1, 0);
  leaf0.assign(n0, -1);
  leaf1.assign(n1, -1);
  std::vector<int> active{DecisionTree::kRoot};
  std::vector<BinStats> hist;
  std::vector<SplitChoice> choices;

  auto finalize_leaf = [&tree](int id, double p_mass, double q_mass) {
    tree.set_stats(id, p_mass, q_mass);
    tree.set_beta(id, optimal_leaf_value(p_mass, q_mass));
  };

  for (int depth = 0; depth < config_.max_depth && !active.empty(); ++depth) {
    HistogramShape shape{active.size(), grid.dim(), grid.max_bins()};
    hist.assign(shape.size(), BinStats{});
    accumulate_histograms(config_.execution, bins_, slot0, slot1, mass0, mass1, shape, hist);
    choices.assign(shape.slots, SplitChoice{});
    find_best_splits(config_.execution, hist, shape, grid, static_cast<double>(config_.min_leaf_total),
                     criterion, choices);

    // remap[s] = (left slot, right slot) for split slots, (-1, -1) for new leaves.
    std::vector<std::pair<int, int>> remap(active.size(), {-1, -1});
    std::vector<int> next;
    for (std::size_t s = 0; s < active.size(); ++s) {
      const int id = active[s];
      const BinStats totals = slot_totals(hist, shape, s);
      const double parent = unsplit_score(totals, criterion);
      const SplitChoice& c = choices[s];
      if (c.found() && parent > 0.0 && c.score < parent * (1.0 - 1e-12)) {
        const double threshold = grid.cuts(static_cast<std::size_t>(c.dim))[static_cast<std::size_t>(c.cut)];
        auto [l, r] = tree.split(id, c.dim, c.cut, threshold);
        tree.set_stats(l, c.left.mass0, c.left.mass1);
        tree.set_stats(r, c.right.mass0, c.right.mass1);
        remap[s] = {static_cast<int>(next.size()), static_cast<int>(next.size() + 1)};
        next.push_back(l);
        next.push_back(r);
      } else {
        finalize_leaf(id, totals.mass0, totals.mass1);
      }
    }

    auto route = [&](const BinnedSample& b, std::vector<int>& slot, std::vector<int>& leaf) {
      for (std::size_t i = 0; i < slot.size(); ++i) {
        const int s = slot[i];
        if (s < 0) continue;
        const auto [l, r] = remap[static_cast<std::size_t>(s)];
        if (l < 0) {
          leaf[i] = active[static_cast<std::size_t>(s)];
          slot[i] = -1;
        } else {
          const Node& n = tree.node(active[static_cast<std::size_t>(s)]);
          slot[i] = b(i, static_cast<std::size_t>(n.dim)) <= n.cut ? l : r;
        }
      }
    };
    route(bins_.group[0], slot0, leaf0);
    route(bins_.group[1], slot1, leaf1);
    active = std::move(next);
  }

  // Nodes at the depth cap become leaves with the masses recorded at their split.
  for (int id : active) finalize_leaf(id, tree.node(id).stat0, tree.node(id).stat1);
  for (std::size_t i = 0; i < n0; ++i) {
    if (slot0[i] >= 0) leaf0[i] = active[static_cast<std::size_t>(slot0[i])];
  }
  for (std::size_t i = 0; i < n1; ++i) {
    if (slot1[i] >= 0) leaf1[i] = active[static_cast<std::size_t>(slot1[i])];
  }
  return tree;
}

const DecisionTree& Booster::step() {
  std::vector<int> leaf0;
  std::vector<int> leaf1;
  DecisionTree tree = grow_tree(leaf0, leaf1);
  const double nu = config_.learning_rate;
  std::vector<double> delta0(leaf0.size());
  std::vector<double> delta1(leaf1.size());
  for (std::size_t i = 0; i < leaf0.size(); ++i) delta0[i] = nu * tree.node(leaf0[i]).beta;
  for (std::size_t i = 0; i < leaf1.size(); ++i) delta1[i] = nu * tree.node(leaf1[i]).beta;
  state_.add(delta0, delta1);
  last_log_c_ = rebalance(state_);
  model_.offset += last_log_c_;
  model_.trees.push_back(std::move(tree));
  return model_.trees.back();
}

FitResult fit_ensemble(const TwoSampleDataset& data, const CutGrid& grid, const BoostConfig& config) {
  Booster booster(data, grid, config);
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(config.max_trees) + 1);
  trace.push_back(booster.training_loss());
  for (int k = 0; k < config.max_trees; ++k) {
    booster.step();
    trace.push_back(booster.training_loss());
  }
  FitResult out;
  out.state = booster.state();
  out.model = std::move(booster).release_model();
  out.train_loss = std::move(trace);
  return out;
}

FitResult fit_forward_stagewise(const TwoSampleDataset& data, const CutGrid& grid, BoostConfig config) {
  config.algorithm = Algorithm::forward_stagewise;
  return fit_ensemble(data, grid, config);
}

FitResult fit_gradient_boost(const TwoSampleDataset& data, const CutGrid& grid, BoostConfig config) {
  config.algorithm = Algorithm::gradient_boost;
  return fit_ensemble(data, grid, config);
}

namespace {

// Held-out l_n after each added tree, for one fold.
std::vector<double> fold_curve(const TwoSampleDataset& train, const TwoSampleDataset& held,
                               const CutGrid& grid, const BoostConfig& config) {
  Booster booster(train, grid, config);
  const BinnedData held_bins(held, grid);
  std::vector<double> f0(held.n0(), 0.0);
  std::vector<double> f1(held.n1(), 0.0);
  auto loss = [&] {
    double a = 0.0;
    double b = 0.0;
    for (double f : f0) a += std::exp(-f);
    for (double f : f1) b += std::exp(f);
    return a / static_cast<double>(f0.size()) + b / static_cast<double>(f1.size());
  };
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(config.max_trees) + 1);
  curve.push_back(loss());
  for (int k = 0; k < config.max_trees; ++k) {
    const DecisionTree& tree = booster.step();
    const double log_c = booster.last_log_rebalance();
    for (std::size_t i = 0; i < f0.size(); ++i) {
      f0[i] += config.learning_rate * tree.node(tree.leaf_for(held_bins.group[0], i)).beta + log_c;
    }
    for (std::size_t i = 0; i < f1.size(); ++i) {
      f1[i] += config.learning_rate * tree.node(tree.leaf_for(held_bins.group[1], i)).beta + log_c;
    }
    curve.push_back(loss());
  }
  return curve;
}

}  // namespace

CvResult select_tree_count_cv(const TwoSampleDataset& data, const CutGrid& grid,
                              const BoostConfig& config) {
  config.validate();
  const auto folds = static_cast<std::size_t>(config.cv_folds);
  if (data.n0() < folds || data.n1() < folds) {
    throw ConfigError("each group needs at least cv_folds observations");
  }
  // Stratified assignment: each group is shuffled and dealt round-robin.
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> fold_of[2];
  for (int g = 0; g < 2; ++g) {
    const std::size_t n = g == 0 ? data.n0() : data.n1();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    fold_of[g].resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold_of[g][perm[pos]] = pos % folds;
  }

  std::vector<std::vector<double>> curves(folds);
  std::vector<std::exception_ptr> errors(folds);
  BoostConfig inner = config;
  inner.execution = config.execution;
#pragma omp parallel for schedule(dynamic) if (config.execution == Execution::parallel)
  for (long f = 0; f < static_cast<long>(folds); ++f) {
    try {
      std::vector<std::size_t> train[2];
      std::vector<std::size_t> held[2];
      for (int g = 0; g < 2; ++g) {
        for (std::size_t i = 0; i < fold_of[g].size(); ++i) {
          (fold_of[g][i] == static_cast<std::size_t>(f) ? held[g] : train[g]).push_back(i);
        }
      }
      const TwoSampleDataset train_data = data.subset(train[0], train[1]);
      const TwoSampleDataset held_data = data.subset(held[0], held[1]);
      curves[static_cast<std::size_t>(f)] = fold_curve(train_data, held_data, grid, inner);
    } catch (...) {
      errors[static_cast<std::size_t>(f)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  CvResult out;
  out.curve.assign(static_cast<std::size_t>(config.max_trees) + 1, 0.0);
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.size(); ++k) out.curve[k] += c[k];
  }
  for (double& v : out.curve) v /= static_cast<double>(folds);
  out.best_trees = static_cast<int>(std::min_element(out.curve.begin(), out.curve.end()) - out.curve.begin());
  return out;
}

FitResult fit_with_cv(const TwoSampleDataset& data, const CutGrid& grid, const BoostConfig& config,
                      CvResult* cv_out) {
  CvResult cv = select_tree_count_cv(data, grid, config);
  BoostConfig final_config = config;
  final_config.max_trees = cv.best_trees;
  FitResult fit = fit_ensemble(data, grid, final_config);
  if (cv_out) *cv_out = std::move(cv);
  return fit;
}

std::vector<double> predict_log_weight(const EnsembleModel& model, const Sample& points, Execution exec) {
  if (points.cols() != model.input_dim()) {
    throw DataError("points have " + std::to_string(points.cols()) + " columns, model expects " +
                    std::to_string(model.input_dim()));
  }
  std::vector<double> out(points.rows(), model.offset);
  add_tree_values(exec, model.trees, model.learning_rate, points, out);
  return out;
}

std::vector<double> predict_log_ratio(const EnsembleModel& model, const Sample& points, Execution exec) {
  std::vector<double> out = predict_log_weight(model, points, exec);
  for (double& v : out) v *= 2.0;
  return out;
}

}  // namespace balancetree
