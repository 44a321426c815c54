#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace balancetree {

/// Largest |log w| accepted before a model is declared diverged.
inline constexpr double kMaxAbsLogWeight = 700.0;

/// The balancing weight w evaluated at both samples.
///
/// Stored in log domain (F = log w); the exponentiated forms w^-1 at sample 0
/// and w at sample 1 are cached and refreshed on every update.
class BalanceState {
 public:
  BalanceState() = default;
  /// w == 1 everywhere.
  BalanceState(std::size_t n0, std::size_t n1);

  static BalanceState from_log_weights(std::vector<double> log_w0, std::vector<double> log_w1);
  static BalanceState from_weights(std::span<const double> inv_w0, std::span<const double> w1);

  std::size_t n0() const { return log_w0_.size(); }
  std::size_t n1() const { return log_w1_.size(); }
  std::size_t n() const { return n0() + n1(); }

  std::span<const double> log_w0() const { return log_w0_; }
  std::span<const double> log_w1() const { return log_w1_; }
  std::span<const double> inv_w0() const { return inv_w0_; }
  std::span<const double> w1() const { return w1_; }

  /// log w += delta at every point of each group.
  void add(std::span<const double> delta0, std::span<const double> delta1);
  /// log w += log_c everywhere (w scaled by c).
  void shift(double log_c);

  /// Empirical means E_p[w^-1] and E_q[w].
  double mean_inv_w0() const;
  double mean_w1() const;

 private:
  void refresh();

  std::vector<double> log_w0_;
  std::vector<double> log_w1_;
  std::vector<double> inv_w0_;
  std::vector<double> w1_;
};

/// l_n(w) = mean(w^-1 over sample 0) + mean(w over sample 1).
double finite_sample_loss(const BalanceState& state);

/// Minimizer of p_mass * e^-beta + q_mass * e^beta: 0.5 * log(p_mass / q_mass).
/// Throws DegenerateLeafError unless both masses are positive.
double optimal_leaf_value(double p_mass, double q_mass);

/// c = sqrt(E_p[w^-1] / E_q[w]); scaling w by c equalizes both loss terms.
double rebalance_constant(const BalanceState& state);
/// log of rebalance_constant, computed as a difference of logs so that swapping
/// the groups negates it exactly.
double log_rebalance_constant(const BalanceState& state);
/// Applies the correction in place and returns log c.
double rebalance(BalanceState& state);

/// Negative gradients of l_n with respect to F = log w at every sample point:
/// +w^-1 / n0 for sample 0 and -w / n1 for sample 1.
std::pair<std::vector<double>, std::vector<double>> pseudo_residuals(const BalanceState& state);

/// Affinity sqrt(P_l Q_l) + sqrt(P_r Q_r) of a candidate split, with P and Q
/// normalized over the two children. Lies in [0, 1]; lower means a larger
/// Hellinger distance between the split masses.
double hellinger_split_score(double pl, double ql, double pr, double qr);

}  // namespace balancetree
