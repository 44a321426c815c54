#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "balancetree/data.hpp"

namespace balancetree {

/// Branching-process prior over tree shapes: a node at depth t splits with
/// probability a * (1 + t)^-b.
struct TreePrior {
  double a = 0.95;
  double b = 2.0;

  void validate() const;
};

double split_probability(const TreePrior& prior, int depth);

struct Node {
  int depth = 0;
  int parent = -1;
  int left = -1;
  int right = -1;
  // Split rule (internal nodes). `cut` indexes the CutGrid row of `dim`, or -1
  // when the threshold did not come from a grid.
  int dim = -1;
  int cut = -1;
  double threshold = 0.0;
  // Leaf log-weight.
  double beta = 0.0;
  // Cached leaf sufficient statistics, filled by the learners:
  // group-0 mass of w^-1 and group-1 mass of w over the leaf's members.
  double stat0 = 0.0;
  double stat1 = 0.0;
  bool alive = true;

  bool is_leaf() const { return left < 0; }
};

/// Axis-aligned binary tree; values equal to a threshold route left.
///
/// Nodes live in a flat arena. Pruned nodes are recycled, so ids of live nodes
/// stay stable across structural edits.
class DecisionTree {
 public:
  static constexpr int kRoot = 0;

  DecisionTree() : DecisionTree(0) {}
  explicit DecisionTree(std::size_t input_dim, double root_beta = 0.0);

  std::size_t input_dim() const { return input_dim_; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  /// Arena size (an upper bound on live node ids).
  std::size_t capacity() const { return nodes_.size(); }

  void set_beta(int leaf, double beta) { nodes_[static_cast<std::size_t>(leaf)].beta = beta; }
  void set_stats(int leaf, double stat0, double stat1);

  /// Turns a leaf into an internal node; returns (left, right) child ids.
  std::pair<int, int> split(int leaf, int dim, int cut, double threshold, double left_beta = 0.0,
                            double right_beta = 0.0);
  /// Removes both children of a node whose children are leaves.
  void collapse(int id, double beta = 0.0);
  /// Replaces the rule of an internal node, keeping its children.
  void change_rule(int id, int dim, int cut, double threshold);

  /// Live leaves in depth-first, left-first order.
  std::vector<int> leaves() const;
  /// Internal nodes whose children are both leaves.
  std::vector<int> two_gi_nodes() const;
  bool is_two_gi(int id) const;
  std::size_t leaf_count() const;
  /// Maximum leaf depth (0 for a root-only tree).
  int depth() const;

  int leaf_for(std::span<const double> x) const;
  int leaf_for(const BinnedSample& bins, std::size_t row) const;
  double evaluate(std::span<const double> x) const { return node(leaf_for(x)).beta; }

  nlohmann::json to_json() const;
  static DecisionTree from_json(const nlohmann::json& j, std::size_t input_dim);

 private:
  int allocate(const Node& n);
  void check_point(std::span<const double> x) const;

  std::size_t input_dim_ = 0;
  std::vector<Node> nodes_;
  std::vector<int> free_;
};

/// Row indices of both groups partitioned by leaf.
struct LeafPartition {
  std::vector<int> leaf_ids;
  std::vector<std::vector<std::size_t>> rows0;
  std::vector<std::vector<std::size_t>> rows1;
};

LeafPartition route_observations(const DecisionTree& tree, const TwoSampleDataset& data);

}  // namespace balancetree
