#pragma once

// Generalized-Bayesian additive trees: Metropolis-within-Gibbs over K trees
// with inverse-Gaussian leaf priors and a Gamma-distributed temperature.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "balancetree/data.hpp"
#include "balancetree/loss.hpp"
#include "balancetree/tree.hpp"

namespace balancetree {

using Rng = std::mt19937_64;

/// Odd trees (k = 1, 3, ...) place the prior on gamma = e^beta, even trees on
/// gamma^-1, which centers the marginal prior of log w at zero.
enum class Parity { odd, even };

inline Parity parity_of_tree(std::size_t index0) { return index0 % 2 == 0 ? Parity::odd : Parity::even; }

struct LeafPrior {
  double mu = 1.0;
  double lambda = 1000.0;
};

struct LeafPosteriorParams {
  double mu_prime = 1.0;
  double lambda_prime = 1.0;
};

/// s0 sums w_{-k}^-1 over the leaf's sample-0 rows, s1 sums w_{-k} over its
/// sample-1 rows.
LeafPosteriorParams leaf_full_conditional(double s0, double s1, double tau, double zeta,
                                          const LeafPrior& prior, Parity parity);

/// log of the leaf pseudo-likelihood with the leaf value integrated out
/// against its prior.
double integrated_leaf_log_likelihood(double s0, double s1, double tau, double zeta,
                                      const LeafPrior& prior, Parity parity);

double sample_inverse_gaussian(double mu, double lambda, Rng& rng);

/// Leaf value drawn from its full conditional (log or negated log of the
/// inverse-Gaussian draw, by parity).
double sample_leaf_value(const LeafPosteriorParams& post, Parity parity, Rng& rng);

/// Prior times transition-probability factor of a GROW at a leaf of the given
/// depth. `leaves` counts leaves of the current tree, `two_gi_after` counts
/// 2GI nodes of the proposed tree.
double grow_prior_transition_ratio(const TreePrior& prior, int depth, std::size_t leaves,
                                   std::size_t two_gi_after, double p_grow, double p_prune);
/// The matching factor of a PRUNE at a 2GI node of the given depth.
/// `two_gi` counts 2GI nodes of the current tree, `leaves_after` counts leaves
/// of the pruned tree.
double prune_prior_transition_ratio(const TreePrior& prior, int depth, std::size_t two_gi,
                                    std::size_t leaves_after, double p_grow, double p_prune);

struct MoveProbabilities {
  double grow = 1.0 / 3.0;
  double prune = 1.0 / 3.0;
  double change = 1.0 / 3.0;

  void validate() const;
};

enum class MoveKind { grow = 0, prune = 1, change = 2 };

struct MoveOutcome {
  MoveKind kind = MoveKind::grow;
  bool accepted = false;
  /// Grown leaf, or the pruned / changed internal node; -1 for no-op moves.
  int node = -1;
  /// Children of `node` before the move (PRUNE and CHANGE).
  int old_left = -1;
  int old_right = -1;
  double log_alpha = 0.0;
};

/// Everything one MH tree move reads besides the tree.
struct MoveContext {
  const CutGrid* grid = nullptr;
  const BinnedData* bins = nullptr;
  /// Current leaf of each row under this tree; updated on acceptance.
  std::span<int> leaf0;
  std::span<int> leaf1;
  /// w_{-k}^-1 at sample 0 and w_{-k} at sample 1.
  std::span<const double> resid0;
  std::span<const double> resid1;
  double tau = 1.0;
  double zeta = 0.5;
  LeafPrior leaf_prior;
  Parity parity = Parity::odd;
  TreePrior tree_prior;
  MoveProbabilities probs;
};

/// One GROW / PRUNE / CHANGE proposal with MH acceptance. Leaf values of the
/// rejected or accepted tree are left for the caller to redraw.
MoveOutcome mh_tree_move(DecisionTree& tree, const MoveContext& ctx, Rng& rng);

/// Draw from Gamma(a0 + n, rate b0 + n * l_n(w)).
double update_tau(const BalanceState& state, double a0, double b0, Rng& rng);

struct GibbsConfig {
  int trees = 200;
  double lambda0 = 5.0;
  TreePrior tree_prior;
  double a0_tau = 1.0;
  double b0_tau = 1.0;
  int burn_in = 2000;
  int draws = 1000;
  /// Sweeps between recorded draws after burn-in.
  int thin = 1;
  MoveProbabilities move_probs;
  std::uint64_t seed = 0;
  /// Drop the pseudo-likelihood: tau is held at 0 and every move sees a flat
  /// likelihood, so the chain targets the prior.
  bool prior_only = false;
  /// Store every draw of log r at every evaluation point. The running mean is
  /// kept regardless.
  bool keep_draws = true;
  /// Sweeps between from-scratch recomputations of log w.
  int check_interval = 100;

  void validate() const;
};

struct MoveCounts {
  std::array<std::uint32_t, 3> proposed{};
  std::array<std::uint32_t, 3> accepted{};
};

struct PosteriorDraws {
  std::size_t points = 0;
  std::size_t trees = 0;
  std::size_t draws = 0;
  /// draws x points, row-major; empty unless keep_draws.
  std::vector<double> log_ratio_draws;
  /// Per-point mean of log r over the recorded draws.
  std::vector<double> mean_log_ratio;
  /// 0 in prior-only runs.
  std::vector<double> tau_draws;
  /// draws x trees, row-major.
  std::vector<int> tree_depths;
  std::vector<int> tree_leaves;
  /// One entry per sweep, burn-in included.
  std::vector<MoveCounts> moves;
  /// Largest |incremental - recomputed| log w seen at the periodic checks.
  double max_drift = 0.0;

  std::span<const double> draw(std::size_t i) const {
    return {log_ratio_draws.data() + i * points, points};
  }
};

/// Runs the chain from root-only trees. Evaluation points default to sample 0
/// followed by sample 1.
PosteriorDraws run_sampler(const TwoSampleDataset& data, const CutGrid& grid, const GibbsConfig& config,
                           const Sample* eval_points = nullptr);

struct PosteriorSummary {
  std::vector<double> quantile_levels;
  std::vector<double> mean;
  /// points x levels, row-major.
  std::vector<double> quantiles;
};

/// Per-point mean and type-7 (linear interpolation) quantiles of log r.
PosteriorSummary summarize(const PosteriorDraws& draws, std::span<const double> levels);

/// Type-7 quantile of an unsorted sample.
double empirical_quantile(std::vector<double> values, double level);

}  // namespace balancetree
