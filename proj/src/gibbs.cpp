#include "balancetree/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "balancetree/error.hpp"

namespace balancetree {

namespace {

// Data-driven increments to (lambda, lambda / mu^2) of the leaf posterior.
std::pair<double, double> increments(double s0, double s1, double tau, double zeta, Parity parity) {
  const double from0 = 2.0 * tau * s0 / zeta;
  const double from1 = 2.0 * tau * s1 / (1.0 - zeta);
  return parity == Parity::odd ? std::pair{from0, from1} : std::pair{from1, from0};
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::size_t uniform_index(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

int descend(const DecisionTree& tree, int id, const BinnedSample& bins, std::size_t row) {
  while (!tree.node(id).is_leaf()) {
    const Node& n = tree.node(id);
    id = bins(row, static_cast<std::size_t>(n.dim)) <= n.cut ? n.left : n.right;
  }
  return id;
}

struct PairStats {
  double s0[2] = {0.0, 0.0};
  double s1[2] = {0.0, 0.0};
};

double log_lik(const MoveContext& ctx, double s0, double s1) {
  return integrated_leaf_log_likelihood(s0, s1, ctx.tau, ctx.zeta, ctx.leaf_prior, ctx.parity);
}

bool accept(double log_alpha, Rng& rng) {
  if (log_alpha >= 0.0) return true;
  return uniform01(rng) < std::exp(log_alpha);
}

}  // namespace

LeafPosteriorParams leaf_full_conditional(double s0, double s1, double tau, double zeta,
                                          const LeafPrior& prior, Parity parity) {
  const auto [da, db] = increments(s0, s1, tau, zeta, parity);
  LeafPosteriorParams out;
  out.lambda_prime = prior.lambda + da;
  out.mu_prime = std::sqrt(out.lambda_prime / (prior.lambda / (prior.mu * prior.mu) + db));
  return out;
}

double integrated_leaf_log_likelihood(double s0, double s1, double tau, double zeta,
                                      const LeafPrior& prior, Parity parity) {
  const LeafPosteriorParams post = leaf_full_conditional(s0, s1, tau, zeta, prior, parity);
  return 0.5 * (std::log(prior.lambda) - std::log(post.lambda_prime)) + prior.lambda / prior.mu -
         post.lambda_prime / post.mu_prime;
}

// Michael, Schucany and Haas (1976), with the smaller root written as
// mu / (1 + t + sqrt(t (t + 2))) to avoid cancellation at large lambda.
double sample_inverse_gaussian(double mu, double lambda, Rng& rng) {
  const double nu = std::normal_distribution<double>(0.0, 1.0)(rng);
  const double t = mu * nu * nu / (2.0 * lambda);
  const double x = mu / (1.0 + t + std::sqrt(t * (t + 2.0)));
  return uniform01(rng) * (mu + x) <= mu ? x : mu * mu / x;
}

double sample_leaf_value(const LeafPosteriorParams& post, Parity parity, Rng& rng) {
  const double z = sample_inverse_gaussian(post.mu_prime, post.lambda_prime, rng);
  return parity == Parity::odd ? std::log(z) : -std::log(z);
}

double grow_prior_transition_ratio(const TreePrior& prior, int depth, std::size_t leaves,
                                   std::size_t two_gi_after, double p_grow, double p_prune) {
  const double a = prior.a;
  const double child = 1.0 - a * std::pow(2.0 + depth, -prior.b);
  const double prior_ratio = a * child * child / (std::pow(1.0 + depth, prior.b) - a);
  return prior_ratio * static_cast<double>(leaves) / static_cast<double>(two_gi_after) * p_prune / p_grow;
}

double prune_prior_transition_ratio(const TreePrior& prior, int depth, std::size_t two_gi,
                                    std::size_t leaves_after, double p_grow, double p_prune) {
  const double a = prior.a;
  const double child = 1.0 - a * std::pow(2.0 + depth, -prior.b);
  const double prior_ratio = (std::pow(1.0 + depth, prior.b) - a) / (a * child * child);
  return prior_ratio * static_cast<double>(two_gi) / static_cast<double>(leaves_after) * p_grow / p_prune;
}

void MoveProbabilities::validate() const {
  if (grow < 0.0 || prune < 0.0 || change < 0.0) throw ConfigError("move probabilities must be nonnegative");
  if (std::abs(grow + prune + change - 1.0) > 1e-9) throw ConfigError("move probabilities must sum to 1");
}

MoveOutcome mh_tree_move(DecisionTree& tree, const MoveContext& ctx, Rng& rng) {
  MoveOutcome out;
  const double u = uniform01(rng);
  out.kind = u < ctx.probs.grow                     ? MoveKind::grow
             : u < ctx.probs.grow + ctx.probs.prune ? MoveKind::prune
                                                    : MoveKind::change;
  const BinnedSample& b0 = ctx.bins->group[0];
  const BinnedSample& b1 = ctx.bins->group[1];
  const std::size_t dims = ctx.grid->dim();

  auto draw_rule = [&](int& dim, int& cut) {
    dim = static_cast<int>(uniform_index(dims, rng));
    cut = static_cast<int>(uniform_index(ctx.grid->count(static_cast<std::size_t>(dim)), rng));
  };
  // Sums over rows in `members` leaves, split by (dim, cut).
  auto split_stats = [&](int member_a, int member_b, int dim, int cut) {
    PairStats s;
    const auto d = static_cast<std::size_t>(dim);
    for (std::size_t i = 0; i < ctx.leaf0.size(); ++i) {
      const int l = ctx.leaf0[i];
      if (l == member_a || l == member_b) s.s0[b0(i, d) <= cut ? 0 : 1] += ctx.resid0[i];
    }
    for (std::size_t i = 0; i < ctx.leaf1.size(); ++i) {
      const int l = ctx.leaf1[i];
      if (l == member_a || l == member_b) s.s1[b1(i, d) <= cut ? 0 : 1] += ctx.resid1[i];
    }
    return s;
  };

  if (out.kind == MoveKind::grow) {
    const std::vector<int> leaves = tree.leaves();
    const int leaf = leaves[uniform_index(leaves.size(), rng)];
    int dim = 0;
    int cut = 0;
    draw_rule(dim, cut);
    const PairStats s = split_stats(leaf, leaf, dim, cut);
    const Node& n = tree.node(leaf);
    const std::size_t gi = tree.two_gi_nodes().size();
    const bool parent_was_gi = n.parent >= 0 && tree.is_two_gi(n.parent);
    const std::size_t gi_after = gi + 1 - (parent_was_gi ? 1 : 0);
    const double ratio =
        grow_prior_transition_ratio(ctx.tree_prior, n.depth, leaves.size(), gi_after, ctx.probs.grow, ctx.probs.prune);
    out.node = leaf;
    out.log_alpha = std::log(ratio) + log_lik(ctx, s.s0[0], s.s1[0]) + log_lik(ctx, s.s0[1], s.s1[1]) -
                    log_lik(ctx, s.s0[0] + s.s0[1], s.s1[0] + s.s1[1]);
    if (!accept(out.log_alpha, rng)) return out;
    const double threshold = ctx.grid->cuts(static_cast<std::size_t>(dim))[static_cast<std::size_t>(cut)];
    tree.split(leaf, dim, cut, threshold);
    out.accepted = true;
    for (std::size_t i = 0; i < ctx.leaf0.size(); ++i) {
      if (ctx.leaf0[i] == leaf) ctx.leaf0[i] = descend(tree, leaf, b0, i);
    }
    for (std::size_t i = 0; i < ctx.leaf1.size(); ++i) {
      if (ctx.leaf1[i] == leaf) ctx.leaf1[i] = descend(tree, leaf, b1, i);
    }
    return out;
  }

  const std::vector<int> gi = tree.two_gi_nodes();
  if (gi.empty()) return out;  // root-only tree: counted as a rejection
  const int id = gi[uniform_index(gi.size(), rng)];
  const Node n = tree.node(id);
  out.node = id;
  out.old_left = n.left;
  out.old_right = n.right;
  const PairStats cur = split_stats(n.left, n.right, n.dim, n.cut);
  const double cur_ll = log_lik(ctx, cur.s0[0], cur.s1[0]) + log_lik(ctx, cur.s0[1], cur.s1[1]);

  if (out.kind == MoveKind::prune) {
    const std::size_t leaves_after = tree.leaf_count() - 1;
    const double ratio =
        prune_prior_transition_ratio(ctx.tree_prior, n.depth, gi.size(), leaves_after, ctx.probs.grow, ctx.probs.prune);
    out.log_alpha =
        std::log(ratio) + log_lik(ctx, cur.s0[0] + cur.s0[1], cur.s1[0] + cur.s1[1]) - cur_ll;
    if (!accept(out.log_alpha, rng)) return out;
    tree.collapse(id);
    out.accepted = true;
    for (int& l : ctx.leaf0) {
      if (l == n.left || l == n.right) l = id;
    }
    for (int& l : ctx.leaf1) {
      if (l == n.left || l == n.right) l = id;
    }
    return out;
  }

  int dim = 0;
  int cut = 0;
  draw_rule(dim, cut);
  const PairStats next = split_stats(n.left, n.right, dim, cut);
  out.log_alpha = log_lik(ctx, next.s0[0], next.s1[0]) + log_lik(ctx, next.s0[1], next.s1[1]) - cur_ll;
  if (!accept(out.log_alpha, rng)) return out;
  tree.change_rule(id, dim, cut, ctx.grid->cuts(static_cast<std::size_t>(dim))[static_cast<std::size_t>(cut)]);
  out.accepted = true;
  for (std::size_t i = 0; i < ctx.leaf0.size(); ++i) {
    const int l = ctx.leaf0[i];
    if (l == n.left || l == n.right) ctx.leaf0[i] = descend(tree, id, b0, i);
  }
  for (std::size_t i = 0; i < ctx.leaf1.size(); ++i) {
    const int l = ctx.leaf1[i];
    if (l == n.left || l == n.right) ctx.leaf1[i] = descend(tree, id, b1, i);
  }
  return out;
}

namespace {

double draw_tau(std::size_t n, double loss, double a0, double b0, Rng& rng) {
  const double shape = a0 + static_cast<double>(n);
  const double rate = b0 + static_cast<double>(n) * loss;
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

}  // namespace

double update_tau(const BalanceState& state, double a0, double b0, Rng& rng) {
  return draw_tau(state.n(), finite_sample_loss(state), a0, b0, rng);
}

void GibbsConfig::validate() const {
  if (trees < 2 || trees % 2 != 0) throw ConfigError("number of trees must be even and positive");
  if (!(lambda0 > 0.0)) throw ConfigError("lambda0 must be positive");
  tree_prior.validate();
  if (!(a0_tau > 0.0) || !(b0_tau > 0.0)) throw ConfigError("tau prior parameters must be positive");
  if (burn_in < 0 || draws < 0) throw ConfigError("burn-in and draws must be nonnegative");
  if (thin < 1) throw ConfigError("thin must be >= 1");
  if (check_interval < 1) throw ConfigError("check interval must be >= 1");
  move_probs.validate();
}

namespace {

// Sampler state for one chain. Group-0 quantities track w^-1, group-1
// quantities track w, mirroring the two terms of the loss.
class Chain {
 public:
  Chain(const TwoSampleDataset& data, const CutGrid& grid, const GibbsConfig& config, const Sample* eval)
      : data_(data), grid_(grid), config_(config), bins_(data, grid), rng_(config.seed) {
    const auto k = static_cast<std::size_t>(config.trees);
    trees_.assign(k, DecisionTree(data.dim()));
    leaf0_.assign(k, std::vector<int>(data.n0(), DecisionTree::kRoot));
    leaf1_.assign(k, std::vector<int>(data.n1(), DecisionTree::kRoot));
    f0_.assign(data.n0(), 0.0);
    f1_.assign(data.n1(), 0.0);
    inv_w0_.assign(data.n0(), 1.0);
    w1_.assign(data.n1(), 1.0);
    r0_.resize(data.n0());
    r1_.resize(data.n1());
    c0_.resize(data.n0());
    c1_.resize(data.n1());
    if (eval) {
      if (eval->cols() != data.dim()) throw DataError("evaluation points do not match the data dimension");
      eval_bins_ = BinnedSample(*eval, grid);
      leaf_e_.assign(k, std::vector<int>(eval->rows(), DecisionTree::kRoot));
      fe_.assign(eval->rows(), 0.0);
      ce_.resize(eval->rows());
    }
    has_eval_ = eval != nullptr;
    prior_.mu = 1.0;
    prior_.lambda = config.lambda0 * config.trees;
    const auto n = static_cast<double>(data.n());
    tau_ = config.prior_only ? 0.0 : (config.a0_tau + n) / (config.b0_tau + 2.0 * n);
  }

  std::size_t eval_points() const { return has_eval_ ? fe_.size() : data_.n(); }

  MoveCounts sweep() {
    MoveCounts counts;
    for (std::size_t k = 0; k < trees_.size(); ++k) update_tree(k, counts);
    for (std::size_t i = 0; i < f0_.size(); ++i) inv_w0_[i] = std::exp(-f0_[i]);
    for (std::size_t i = 0; i < f1_.size(); ++i) w1_[i] = std::exp(f1_[i]);
    check_finite();
    if (!config_.prior_only) {
      double a = 0.0;
      double b = 0.0;
      for (double v : inv_w0_) a += v;
      for (double v : w1_) b += v;
      const double loss = a / static_cast<double>(data_.n0()) + b / static_cast<double>(data_.n1());
      tau_ = draw_tau(data_.n(), loss, config_.a0_tau, config_.b0_tau, rng_);
    }
    return counts;
  }

  // Recomputes log w from the trees; returns the largest deviation.
  double resync() {
    double drift = 0.0;
    auto rebuild = [&](const BinnedSample& b, std::vector<double>& f, std::vector<std::vector<int>>& leaf) {
      for (std::size_t i = 0; i < f.size(); ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < trees_.size(); ++k) {
          const int l = trees_[k].leaf_for(b, i);
          if (l != leaf[k][i]) throw Error("leaf assignment out of sync with tree " + std::to_string(k));
          sum += trees_[k].node(l).beta;
        }
        drift = std::max(drift, std::abs(sum - f[i]));
        f[i] = sum;
      }
    };
    rebuild(bins_.group[0], f0_, leaf0_);
    rebuild(bins_.group[1], f1_, leaf1_);
    if (has_eval_) rebuild(eval_bins_, fe_, leaf_e_);
    for (std::size_t i = 0; i < f0_.size(); ++i) inv_w0_[i] = std::exp(-f0_[i]);
    for (std::size_t i = 0; i < f1_.size(); ++i) w1_[i] = std::exp(f1_[i]);
    return drift;
  }

  void record(PosteriorDraws& out) {
    const std::size_t m = eval_points();
    std::vector<double> lr(m);
    if (has_eval_) {
      for (std::size_t i = 0; i < m; ++i) lr[i] = 2.0 * fe_[i];
    } else {
      for (std::size_t i = 0; i < f0_.size(); ++i) lr[i] = 2.0 * f0_[i];
      for (std::size_t i = 0; i < f1_.size(); ++i) lr[f0_.size() + i] = 2.0 * f1_[i];
    }
    for (std::size_t i = 0; i < m; ++i) out.mean_log_ratio[i] += lr[i];
    if (config_.keep_draws) out.log_ratio_draws.insert(out.log_ratio_draws.end(), lr.begin(), lr.end());
    out.tau_draws.push_back(tau_);
    for (const auto& t : trees_) {
      out.tree_depths.push_back(t.depth());
      out.tree_leaves.push_back(static_cast<int>(t.leaf_count()));
    }
    ++out.draws;
  }

 private:
  void update_tree(std::size_t k, MoveCounts& counts) {
    DecisionTree& tree = trees_[k];
    std::vector<int>& leaf0 = leaf0_[k];
    std::vector<int>& leaf1 = leaf1_[k];
    const Parity parity = parity_of_tree(k);

    // Remove tree k from the current fit.
    exp_beta_.assign(tree.capacity(), 1.0);
    for (int l : tree.leaves()) exp_beta_[static_cast<std::size_t>(l)] = std::exp(tree.node(l).beta);
    for (std::size_t i = 0; i < leaf0.size(); ++i) {
      const auto l = static_cast<std::size_t>(leaf0[i]);
      c0_[i] = tree.node(leaf0[i]).beta;
      r0_[i] = inv_w0_[i] * exp_beta_[l];
    }
    for (std::size_t i = 0; i < leaf1.size(); ++i) {
      const auto l = static_cast<std::size_t>(leaf1[i]);
      c1_[i] = tree.node(leaf1[i]).beta;
      r1_[i] = w1_[i] / exp_beta_[l];
    }
    if (has_eval_) {
      for (std::size_t i = 0; i < ce_.size(); ++i) ce_[i] = tree.node(leaf_e_[k][i]).beta;
    }

    MoveContext ctx;
    ctx.grid = &grid_;
    ctx.bins = &bins_;
    ctx.leaf0 = leaf0;
    ctx.leaf1 = leaf1;
    ctx.resid0 = r0_;
    ctx.resid1 = r1_;
    ctx.tau = tau_;
    ctx.zeta = data_.zeta();
    ctx.leaf_prior = prior_;
    ctx.parity = parity;
    ctx.tree_prior = config_.tree_prior;
    ctx.probs = config_.move_probs;
    const MoveOutcome move = mh_tree_move(tree, ctx, rng_);
    const auto kind = static_cast<std::size_t>(move.kind);
    ++counts.proposed[kind];
    if (move.accepted) {
      ++counts.accepted[kind];
      if (has_eval_) reroute_eval(k, move);
    }

    // Redraw every leaf from its full conditional.
    s0_.assign(tree.capacity(), 0.0);
    s1_.assign(tree.capacity(), 0.0);
    for (std::size_t i = 0; i < leaf0.size(); ++i) s0_[static_cast<std::size_t>(leaf0[i])] += r0_[i];
    for (std::size_t i = 0; i < leaf1.size(); ++i) s1_[static_cast<std::size_t>(leaf1[i])] += r1_[i];
    exp_beta_.assign(tree.capacity(), 1.0);
    for (int l : tree.leaves()) {
      const auto li = static_cast<std::size_t>(l);
      const LeafPosteriorParams post = leaf_full_conditional(s0_[li], s1_[li], tau_, data_.zeta(), prior_, parity);
      const double beta = sample_leaf_value(post, parity, rng_);
      tree.set_beta(l, beta);
      exp_beta_[li] = std::exp(beta);
    }

    for (std::size_t i = 0; i < leaf0.size(); ++i) {
      const int l = leaf0[i];
      f0_[i] += tree.node(l).beta - c0_[i];
      inv_w0_[i] = r0_[i] / exp_beta_[static_cast<std::size_t>(l)];
    }
    for (std::size_t i = 0; i < leaf1.size(); ++i) {
      const int l = leaf1[i];
      f1_[i] += tree.node(l).beta - c1_[i];
      w1_[i] = r1_[i] * exp_beta_[static_cast<std::size_t>(l)];
    }
    if (has_eval_) {
      for (std::size_t i = 0; i < ce_.size(); ++i) fe_[i] += tree.node(leaf_e_[k][i]).beta - ce_[i];
    }
  }

  void reroute_eval(std::size_t k, const MoveOutcome& move) {
    const DecisionTree& tree = trees_[k];
    for (std::size_t i = 0; i < fe_.size(); ++i) {
      int& l = leaf_e_[k][i];
      if (l == move.node || l == move.old_left || l == move.old_right) l = descend(tree, move.node, eval_bins_, i);
    }
  }

  void check_finite() const {
    auto check = [](const std::vector<double>& f, int group) {
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (!(std::abs(f[i]) <= kMaxAbsLogWeight)) {
          throw DivergenceError("sampler diverged: |log w| exceeds " + std::to_string(kMaxAbsLogWeight) +
                                " at sample " + std::to_string(group) + " row " + std::to_string(i));
        }
      }
    };
    check(f0_, 0);
    check(f1_, 1);
  }

  const TwoSampleDataset& data_;
  const CutGrid& grid_;
  const GibbsConfig& config_;
  BinnedData bins_;
  Rng rng_;
  LeafPrior prior_;
  double tau_ = 0.0;

  std::vector<DecisionTree> trees_;
  std::vector<std::vector<int>> leaf0_;
  std::vector<std::vector<int>> leaf1_;
  std::vector<double> f0_;
  std::vector<double> f1_;
  std::vector<double> inv_w0_;
  std::vector<double> w1_;

  bool has_eval_ = false;
  BinnedSample eval_bins_;
  std::vector<std::vector<int>> leaf_e_;
  std::vector<double> fe_;

  // Per-tree scratch.
  std::vector<double> r0_;
  std::vector<double> r1_;
  std::vector<double> c0_;
  std::vector<double> c1_;
  std::vector<double> ce_;
  std::vector<double> s0_;
  std::vector<double> s1_;
  std::vector<double> exp_beta_;
};

}  // namespace

PosteriorDraws run_sampler(const TwoSampleDataset& data, const CutGrid& grid, const GibbsConfig& config,
                           const Sample* eval_points) {
  config.validate();
  if (grid.dim() != data.dim()) throw DataError("cut grid dimension does not match the data");
  Chain chain(data, grid, config, eval_points);

  PosteriorDraws out;
  out.points = chain.eval_points();
  out.trees = static_cast<std::size_t>(config.trees);
  out.mean_log_ratio.assign(out.points, 0.0);
  const auto draws = static_cast<std::size_t>(config.draws);
  if (config.keep_draws) out.log_ratio_draws.reserve(draws * out.points);
  out.tau_draws.reserve(draws);

  const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.draws) * config.thin;
  out.moves.reserve(static_cast<std::size_t>(total));
  for (long s = 1; s <= total; ++s) {
    out.moves.push_back(chain.sweep());
    if (s % config.check_interval == 0) {
      const double drift = chain.resync();
      out.max_drift = std::max(out.max_drift, drift);
      if (drift > 1e-8) throw Error("log w drifted by " + std::to_string(drift) + " from its tree sum");
    }
    if (s > config.burn_in && (s - config.burn_in) % config.thin == 0) chain.record(out);
  }
  if (out.draws > 0) {
    for (double& m : out.mean_log_ratio) m /= static_cast<double>(out.draws);
  }
  return out;
}

double empirical_quantile(std::vector<double> values, double level) {
  if (values.empty()) throw Error("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

PosteriorSummary summarize(const PosteriorDraws& draws, std::span<const double> levels) {
  if (draws.draws == 0) throw Error("no posterior draws to summarize");
  if (draws.log_ratio_draws.size() != draws.draws * draws.points) {
    throw Error("posterior draws were not kept; rerun with keep_draws");
  }
  for (double q : levels) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile levels must lie in (0, 1)");
  }
  PosteriorSummary out;
  out.quantile_levels.assign(levels.begin(), levels.end());
  out.mean.assign(draws.points, 0.0);
  out.quantiles.resize(draws.points * levels.size());
  std::vector<double> column(draws.draws);
  for (std::size_t p = 0; p < draws.points; ++p) {
    double sum = 0.0;
    for (std::size_t d = 0; d < draws.draws; ++d) {
      column[d] = draws.log_ratio_draws[d * draws.points + p];
      sum += column[d];
    }
    out.mean[p] = sum / static_cast<double>(draws.draws);
    std::sort(column.begin(), column.end());
    for (std::size_t q = 0; q < levels.size(); ++q) {
      const double h = (static_cast<double>(draws.draws) - 1.0) * levels[q];
      const auto lo = static_cast<std::size_t>(std::floor(h));
      out.quantiles[p * levels.size() + q] =
          lo + 1 >= column.size() ? column.back()
                                  : column[lo] + (h - static_cast<double>(lo)) * (column[lo + 1] - column[lo]);
    }
  }
  return out;
}

}  // namespace balancetree
