#include "balancetree/loss.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "balancetree/error.hpp"

namespace balancetree {

namespace {

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

BalanceState::BalanceState(std::size_t n0, std::size_t n1)
    : log_w0_(n0, 0.0), log_w1_(n1, 0.0), inv_w0_(n0, 1.0), w1_(n1, 1.0) {}

BalanceState BalanceState::from_log_weights(std::vector<double> log_w0, std::vector<double> log_w1) {
  BalanceState s;
  s.log_w0_ = std::move(log_w0);
  s.log_w1_ = std::move(log_w1);
  s.refresh();
  return s;
}

BalanceState BalanceState::from_weights(std::span<const double> inv_w0, std::span<const double> w1) {
  std::vector<double> l0(inv_w0.size());
  std::vector<double> l1(w1.size());
  for (std::size_t i = 0; i < l0.size(); ++i) {
    if (!(inv_w0[i] > 0.0) || !std::isfinite(inv_w0[i])) throw Error("weights must be positive and finite");
    l0[i] = -std::log(inv_w0[i]);
  }
  for (std::size_t i = 0; i < l1.size(); ++i) {
    if (!(w1[i] > 0.0) || !std::isfinite(w1[i])) throw Error("weights must be positive and finite");
    l1[i] = std::log(w1[i]);
  }
  return from_log_weights(std::move(l0), std::move(l1));
}

void BalanceState::refresh() {
  inv_w0_.resize(log_w0_.size());
  w1_.resize(log_w1_.size());
  for (std::size_t i = 0; i < log_w0_.size(); ++i) {
    if (!(std::abs(log_w0_[i]) <= kMaxAbsLogWeight)) {
      throw DivergenceError("diverged model: |log w| = " + std::to_string(std::abs(log_w0_[i])) +
                            " at sample 0 row " + std::to_string(i + 1));
    }
    inv_w0_[i] = std::exp(-log_w0_[i]);
  }
  for (std::size_t i = 0; i < log_w1_.size(); ++i) {
    if (!(std::abs(log_w1_[i]) <= kMaxAbsLogWeight)) {
      throw DivergenceError("diverged model: |log w| = " + std::to_string(std::abs(log_w1_[i])) +
                            " at sample 1 row " + std::to_string(i + 1));
    }
    w1_[i] = std::exp(log_w1_[i]);
  }
}

void BalanceState::add(std::span<const double> delta0, std::span<const double> delta1) {
  if (delta0.size() != log_w0_.size() || delta1.size() != log_w1_.size()) {
    throw Error("balance update has the wrong length");
  }
  for (std::size_t i = 0; i < delta0.size(); ++i) log_w0_[i] += delta0[i];
  for (std::size_t i = 0; i < delta1.size(); ++i) log_w1_[i] += delta1[i];
  refresh();
}

void BalanceState::shift(double log_c) {
  for (double& v : log_w0_) v += log_c;
  for (double& v : log_w1_) v += log_c;
  refresh();
}

double BalanceState::mean_inv_w0() const { return mean(inv_w0_); }
double BalanceState::mean_w1() const { return mean(w1_); }

double finite_sample_loss(const BalanceState& state) {
  return state.mean_inv_w0() + state.mean_w1();
}

double optimal_leaf_value(double p_mass, double q_mass) {
  if (!(p_mass > 0.0) || !(q_mass > 0.0) || !std::isfinite(p_mass) || !std::isfinite(q_mass)) {
    throw DegenerateLeafError("degenerate leaf: masses (" + std::to_string(p_mass) + ", " +
                              std::to_string(q_mass) + ") must both be positive");
  }
  return 0.5 * (std::log(p_mass) - std::log(q_mass));
}

double log_rebalance_constant(const BalanceState& state) {
  return 0.5 * (std::log(state.mean_inv_w0()) - std::log(state.mean_w1()));
}

double rebalance_constant(const BalanceState& state) {
  return std::exp(log_rebalance_constant(state));
}

double rebalance(BalanceState& state) {
  const double log_c = log_rebalance_constant(state);
  state.shift(log_c);
  return log_c;
}

std::pair<std::vector<double>, std::vector<double>> pseudo_residuals(const BalanceState& state) {
  const double n0 = static_cast<double>(state.n0());
  const double n1 = static_cast<double>(state.n1());
  std::vector<double> r0(state.inv_w0().begin(), state.inv_w0().end());
  std::vector<double> r1(state.w1().begin(), state.w1().end());
  for (double& v : r0) v /= n0;
  for (double& v : r1) v = -v / n1;
  return {std::move(r0), std::move(r1)};
}

double hellinger_split_score(double pl, double ql, double pr, double qr) {
  const double p_total = pl + pr;
  const double q_total = ql + qr;
  if (!(p_total > 0.0) || !(q_total > 0.0)) return 1.0;
  return std::sqrt((pl / p_total) * (ql / q_total)) + std::sqrt((pr / p_total) * (qr / q_total));
}

}  // namespace balancetree
