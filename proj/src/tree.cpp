#include "balancetree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "balancetree/error.hpp"

namespace balancetree {

void TreePrior::validate() const {
  if (!(a > 0.0 && a < 1.0)) throw ConfigError("tree prior a_T must lie in (0, 1)");
  if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("tree prior b_T must be >= 0");
}

double split_probability(const TreePrior& prior, int depth) {
  return prior.a * std::pow(1.0 + static_cast<double>(depth), -prior.b);
}

DecisionTree::DecisionTree(std::size_t input_dim, double root_beta) : input_dim_(input_dim) {
  Node root;
  root.beta = root_beta;
  nodes_.push_back(root);
}

int DecisionTree::allocate(const Node& n) {
  if (!free_.empty()) {
    int id = free_.back();
    free_.pop_back();
    nodes_[static_cast<std::size_t>(id)] = n;
    return id;
  }
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size() - 1);
}

void DecisionTree::set_stats(int leaf, double stat0, double stat1) {
  auto& n = nodes_[static_cast<std::size_t>(leaf)];
  n.stat0 = stat0;
  n.stat1 = stat1;
}

std::pair<int, int> DecisionTree::split(int leaf, int dim, int cut, double threshold,
                                        double left_beta, double right_beta) {
  if (!node(leaf).alive || !node(leaf).is_leaf()) throw Error("split target is not a leaf");
  if (dim < 0 || static_cast<std::size_t>(dim) >= input_dim_) throw Error("split dimension out of range");
  Node child;
  child.depth = node(leaf).depth + 1;
  child.parent = leaf;
  child.beta = left_beta;
  const int l = allocate(child);
  child.beta = right_beta;
  const int r = allocate(child);
  auto& n = nodes_[static_cast<std::size_t>(leaf)];
  n.left = l;
  n.right = r;
  n.dim = dim;
  n.cut = cut;
  n.threshold = threshold;
  return {l, r};
}

void DecisionTree::collapse(int id, double beta) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.is_leaf() || !node(n.left).is_leaf() || !node(n.right).is_leaf()) {
    throw Error("collapse target must have two leaf children");
  }
  for (int c : {n.left, n.right}) {
    nodes_[static_cast<std::size_t>(c)].alive = false;
    free_.push_back(c);
  }
  n.left = n.right = -1;
  n.dim = n.cut = -1;
  n.threshold = 0.0;
  n.beta = beta;
}

void DecisionTree::change_rule(int id, int dim, int cut, double threshold) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.is_leaf()) throw Error("cannot change the rule of a leaf");
  n.dim = dim;
  n.cut = cut;
  n.threshold = threshold;
}

std::vector<int> DecisionTree::leaves() const {
  std::vector<int> out;
  std::vector<int> stack{kRoot};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const Node& n = node(id);
    if (n.is_leaf()) {
      out.push_back(id);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

bool DecisionTree::is_two_gi(int id) const {
  const Node& n = node(id);
  return !n.is_leaf() && node(n.left).is_leaf() && node(n.right).is_leaf();
}

std::vector<int> DecisionTree::two_gi_nodes() const {
  std::vector<int> out;
  std::vector<int> stack{kRoot};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    const Node& n = node(id);
    if (n.is_leaf()) continue;
    if (is_two_gi(id)) {
      out.push_back(id);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

std::size_t DecisionTree::leaf_count() const {
  std::size_t internal = 0;
  for (const Node& n : nodes_) internal += (n.alive && !n.is_leaf()) ? 1 : 0;
  return internal + 1;
}

int DecisionTree::depth() const {
  int d = 0;
  for (const Node& n : nodes_) {
    if (n.alive) d = std::max(d, n.depth);
  }
  return d;
}

void DecisionTree::check_point(std::span<const double> x) const {
  if (x.size() != input_dim_) {
    throw DataError("point has " + std::to_string(x.size()) + " coordinates, tree expects " +
                    std::to_string(input_dim_));
  }
}

int DecisionTree::leaf_for(std::span<const double> x) const {
  check_point(x);
  int id = kRoot;
  while (!node(id).is_leaf()) {
    const Node& n = node(id);
    id = x[static_cast<std::size_t>(n.dim)] <= n.threshold ? n.left : n.right;
  }
  return id;
}

int DecisionTree::leaf_for(const BinnedSample& bins, std::size_t row) const {
  int id = kRoot;
  while (!node(id).is_leaf()) {
    const Node& n = node(id);
    id = bins(row, static_cast<std::size_t>(n.dim)) <= n.cut ? n.left : n.right;
  }
  return id;
}

nlohmann::json DecisionTree::to_json() const {
  auto rec = [this](auto&& self, int id) -> nlohmann::json {
    const Node& n = node(id);
    if (n.is_leaf()) return {{"beta", n.beta}};
    nlohmann::json j;
    j["dim"] = n.dim;
    j["threshold"] = n.threshold;
    if (n.cut >= 0) j["cut"] = n.cut;
    j["left"] = self(self, n.left);
    j["right"] = self(self, n.right);
    return j;
  };
  return rec(rec, kRoot);
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j, std::size_t input_dim) {
  DecisionTree tree(input_dim);
  auto rec = [&tree, input_dim](auto&& self, const nlohmann::json& node, int id) -> void {
    if (node.contains("beta")) {
      tree.set_beta(id, node.at("beta").get<double>());
      return;
    }
    const int dim = node.at("dim").get<int>();
    if (dim < 0 || static_cast<std::size_t>(dim) >= input_dim) {
      throw DataError("tree node dimension " + std::to_string(dim) + " out of range");
    }
    const int cut = node.value("cut", -1);
    auto [l, r] = tree.split(id, dim, cut, node.at("threshold").get<double>());
    self(self, node.at("left"), l);
    self(self, node.at("right"), r);
  };
  rec(rec, j, kRoot);
  return tree;
}

LeafPartition route_observations(const DecisionTree& tree, const TwoSampleDataset& data) {
  if (data.dim() != tree.input_dim()) {
    throw DataError("dataset has " + std::to_string(data.dim()) + " columns, tree expects " +
                    std::to_string(tree.input_dim()));
  }
  LeafPartition out;
  out.leaf_ids = tree.leaves();
  std::vector<int> slot(tree.capacity(), -1);
  for (std::size_t k = 0; k < out.leaf_ids.size(); ++k) {
    slot[static_cast<std::size_t>(out.leaf_ids[k])] = static_cast<int>(k);
  }
  out.rows0.resize(out.leaf_ids.size());
  out.rows1.resize(out.leaf_ids.size());
  for (std::size_t i = 0; i < data.n0(); ++i) {
    out.rows0[static_cast<std::size_t>(slot[static_cast<std::size_t>(tree.leaf_for(data.sample0().row(i)))])]
        .push_back(i);
  }
  for (std::size_t i = 0; i < data.n1(); ++i) {
    out.rows1[static_cast<std::size_t>(slot[static_cast<std::size_t>(tree.leaf_for(data.sample1().row(i)))])]
        .push_back(i);
  }
  return out;
}

}  // namespace balancetree
