#include <doctest.h>

#include <cmath>
#include <random>

#include "balancetree/error.hpp"
#include "balancetree/loss.hpp"
#include "oracles.hpp"

using namespace balancetree;

namespace {

BalanceState random_state(std::mt19937_64& rng, std::size_t n0, std::size_t n1) {
  std::normal_distribution<double> normal(0.0, 0.7);
  std::vector<double> f0(n0);
  std::vector<double> f1(n1);
  for (double& f : f0) f = normal(rng);
  for (double& f : f1) f = normal(rng);
  return BalanceState::from_log_weights(f0, f1);
}

double loss_at(std::vector<double> f0, std::vector<double> f1) {
  return finite_sample_loss(BalanceState::from_log_weights(std::move(f0), std::move(f1)));
}

}  // namespace

TEST_SUITE("loss") {
  TEST_CASE("unit weights give loss 2") {
    const BalanceState s(3, 5);
    CHECK(finite_sample_loss(s) == 2.0);
    CHECK(s.mean_inv_w0() == 1.0);
  }

  TEST_CASE("optimal leaf value minimizes the leaf loss") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-6.0, 2.0);
    for (int t = 0; t < 200; ++t) {
      const double a = std::pow(10.0, u(rng));
      const double b = std::pow(10.0, u(rng));
      CHECK(std::abs(optimal_leaf_value(a, b) - oracle::leaf_argmin(a, b)) < 1e-8);
    }
    CHECK(optimal_leaf_value(2.0, 2.0) == 0.0);
    CHECK(optimal_leaf_value(3.0, 1.0) == -optimal_leaf_value(1.0, 3.0));
  }

  TEST_CASE("degenerate leaves throw") {
    CHECK_THROWS_AS(optimal_leaf_value(0.0, 1.0), DegenerateLeafError);
    CHECK_THROWS_AS(optimal_leaf_value(1.0, 0.0), DegenerateLeafError);
    CHECK_THROWS_AS(optimal_leaf_value(-1.0, 1.0), DegenerateLeafError);
  }

  TEST_CASE("pseudo-residuals match central differences") {
    std::mt19937_64 rng(2);
    const double h = 1e-6;
    for (int t = 0; t < 20; ++t) {
      const BalanceState s = random_state(rng, 7, 5);
      const auto [r0, r1] = pseudo_residuals(s);
      std::vector<double> f0(s.log_w0().begin(), s.log_w0().end());
      std::vector<double> f1(s.log_w1().begin(), s.log_w1().end());
      for (std::size_t i = 0; i < f0.size(); ++i) {
        auto up = f0;
        auto dn = f0;
        up[i] += h;
        dn[i] -= h;
        const double grad = (loss_at(up, f1) - loss_at(dn, f1)) / (2.0 * h);
        CHECK(std::abs(-grad - r0[i]) <= 1e-6 * std::abs(r0[i]));
      }
      for (std::size_t i = 0; i < f1.size(); ++i) {
        auto up = f1;
        auto dn = f1;
        up[i] += h;
        dn[i] -= h;
        const double grad = (loss_at(f0, up) - loss_at(f0, dn)) / (2.0 * h);
        CHECK(std::abs(-grad - r1[i]) <= 1e-6 * std::abs(r1[i]));
      }
    }
  }

  TEST_CASE("rebalancing equalizes the two terms and never raises the loss") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
      BalanceState s = random_state(rng, 9, 4);
      const double before = finite_sample_loss(s);
      const double c = rebalance_constant(s);
      const double log_c = rebalance(s);
      CHECK(std::exp(log_c) == doctest::Approx(c).epsilon(1e-12));
      CHECK(s.mean_inv_w0() == doctest::Approx(s.mean_w1()).epsilon(1e-12));
      CHECK(finite_sample_loss(s) <= before + 1e-15);
      CHECK(std::abs(log_rebalance_constant(s)) < 1e-12);
    }
  }

  TEST_CASE("log rebalance constant negates under a group swap") {
    std::mt19937_64 rng(4);
    const BalanceState s = random_state(rng, 6, 8);
    std::vector<double> g0(s.log_w1().begin(), s.log_w1().end());
    std::vector<double> g1(s.log_w0().begin(), s.log_w0().end());
    for (double& f : g0) f = -f;
    for (double& f : g1) f = -f;
    const BalanceState swapped = BalanceState::from_log_weights(g0, g1);
    CHECK(log_rebalance_constant(swapped) == -log_rebalance_constant(s));
  }

  TEST_CASE("weights and log weights agree") {
    const std::vector<double> inv_w0{0.5, 2.0};
    const std::vector<double> w1{4.0};
    const BalanceState s = BalanceState::from_weights(inv_w0, w1);
    CHECK(s.log_w0()[0] == doctest::Approx(std::log(2.0)));
    CHECK(s.log_w1()[0] == doctest::Approx(std::log(4.0)));
    CHECK(finite_sample_loss(s) == doctest::Approx(1.25 + 4.0));
    const std::vector<double> bad{0.0};
    CHECK_THROWS_AS(BalanceState::from_weights(bad, w1), Error);
  }

  TEST_CASE("diverged weights are refused") {
    CHECK_THROWS_AS(BalanceState::from_log_weights({701.0}, {0.0}), DivergenceError);
    BalanceState s(1, 1);
    const std::vector<double> d0{0.0};
    const std::vector<double> d1{-800.0};
    CHECK_THROWS_AS(s.add(d0, d1), DivergenceError);
  }

  TEST_CASE("affinity score") {
    CHECK(hellinger_split_score(1.0, 1.0, 1.0, 1.0) == doctest::Approx(1.0));
    CHECK(hellinger_split_score(1.0, 0.0, 0.0, 1.0) == 0.0);
    CHECK(hellinger_split_score(3.0, 1.0, 1.0, 3.0) == doctest::Approx(2.0 * std::sqrt(3.0 / 16.0)));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
      const double v = hellinger_split_score(u(rng), u(rng), u(rng), u(rng));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-15);
    }
  }
}
