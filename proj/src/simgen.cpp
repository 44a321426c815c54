#include "balancetree/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "balancetree/error.hpp"

namespace balancetree {

namespace sp = scenario_params;

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::global_shift_2d: return "GlobalShift2D";
    case ScenarioKind::local_shift_2d: return "LocalShift2D";
    case ScenarioKind::local_dispersion_2d: return "LocalDispersion2D";
    case ScenarioKind::latent_location_20d: return "LatentLocation20D";
    case ScenarioKind::latent_dispersion_20d: return "LatentDispersion20D";
  }
  return "?";
}

ScenarioKind parse_scenario(std::string_view name) {
  for (ScenarioKind k : kAllScenarios) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

namespace {

Eigen::MatrixXd cov2(const std::array<double, 3>& t) {
  Eigen::MatrixXd m(2, 2);
  m << t[0], t[1], t[1], t[2];
  return m;
}

Eigen::VectorXd vec(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// D^{1/2} S D^{1/2} keeps the scaled covariance symmetric.
Eigen::MatrixXd scale_cov(const Eigen::MatrixXd& s, std::span<const double> delta) {
  const Eigen::VectorXd root = vec(delta).cwiseSqrt();
  return root.asDiagonal() * s * root.asDiagonal();
}

void check_pd(const Eigen::MatrixXd& c) {
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw Error("scenario covariance is not positive definite");
}

}  // namespace

Eigen::MatrixXd random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd q(rows, cols);
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) q(i, j) = normal(rng);
  }
  // Two passes of modified Gram-Schmidt.
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      for (Eigen::Index k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
      q.col(j).normalize();
    }
  }
  return q;
}

Scenario make_scenario(ScenarioKind kind, std::uint64_t loading_seed, bool null_effect) {
  Scenario s;
  s.kind = kind;
  auto& g0 = s.groups[0];
  auto& g1 = s.groups[1];
  switch (kind) {
    case ScenarioKind::global_shift_2d:
      g0.push_back({1.0, vec(sp::kGlobalMean0), Eigen::MatrixXd::Identity(2, 2)});
      g1.push_back({1.0, vec(null_effect ? sp::kGlobalMean0 : sp::kGlobalMean1), Eigen::MatrixXd::Identity(2, 2)});
      break;
    case ScenarioKind::local_shift_2d:
      for (std::size_t k = 0; k < sp::kLocalShiftMeans.size(); ++k) {
        g0.push_back({0.2, vec(sp::kLocalShiftMeans[k]), cov2(sp::kLocalShiftCovs[k])});
      }
      g1 = g0;
      if (!null_effect) g1[0].mean += vec(sp::kLocalShiftDelta);
      break;
    case ScenarioKind::local_dispersion_2d:
      for (std::size_t k = 0; k < sp::kLocalDispersionMeans.size(); ++k) {
        g0.push_back({1.0 / 3.0, vec(sp::kLocalDispersionMeans[k]), cov2(sp::kLocalDispersionCovs[k])});
      }
      g1 = g0;
      if (!null_effect) g1[0].cov = scale_cov(g1[0].cov, sp::kLocalDispersionDelta);
      break;
    case ScenarioKind::latent_location_20d:
    case ScenarioKind::latent_dispersion_20d: {
      const auto d = static_cast<Eigen::Index>(sp::kLatentDim);
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
      const bool location = kind == ScenarioKind::latent_location_20d;
      const Eigen::VectorXd mu1 = location ? vec(sp::kLatentLocationMean) : Eigen::VectorXd::Zero(d);
      g0.push_back({sp::kLatentMajorWeight, mu1, eye});
      g0.push_back({1.0 - sp::kLatentMajorWeight, Eigen::VectorXd::Zero(d), sp::kLatentWideVariance * eye});
      g1 = g0;
      if (!null_effect) {
        if (location) {
          g1[0].mean += vec(sp::kLatentLocationDelta);
        } else {
          g1[0].cov = scale_cov(g1[0].cov, sp::kLatentDispersionDelta);
        }
      }
      s.loading = random_orthonormal(sp::kAmbientDim, sp::kLatentDim, loading_seed);
      s.noise_sd = sp::kNoiseSd;
      break;
    }
  }
  for (const auto& g : s.groups) {
    for (const auto& c : g) check_pd(c.cov);
  }
  return s;
}

Scenario Scenario::swapped() const {
  Scenario s = *this;
  std::swap(s.groups[0], s.groups[1]);
  return s;
}

TwoSampleDataset generate(const Scenario& scenario, std::size_t n0, std::size_t n1, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const auto dl = static_cast<Eigen::Index>(scenario.latent_dim());
  const std::size_t da = scenario.ambient_dim();
  const bool project = scenario.loading.size() != 0;

  auto draw_group = [&](int g, std::size_t n) {
    const auto& comps = scenario.groups[static_cast<std::size_t>(g)];
    std::vector<double> weights;
    std::vector<Eigen::MatrixXd> chol;
    for (const auto& c : comps) {
      weights.push_back(c.weight);
      chol.push_back(Eigen::LLT<Eigen::MatrixXd>(c.cov).matrixL());
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    Sample out(n, da);
    Eigen::VectorXd z(dl);
    Eigen::VectorXd x;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = pick(rng);
      for (Eigen::Index j = 0; j < dl; ++j) z(j) = normal(rng);
      z = comps[k].mean + chol[k] * z;
      if (project) {
        x = scenario.loading * z;
        for (Eigen::Index j = 0; j < x.size(); ++j) x(j) += scenario.noise_sd * normal(rng);
      } else {
        x = z;
      }
      for (std::size_t j = 0; j < da; ++j) out(i, j) = x(static_cast<Eigen::Index>(j));
    }
    return out;
  };
  Sample s0 = draw_group(0, n0);
  Sample s1 = draw_group(1, n1);
  return {std::move(s0), std::move(s1)};
}

namespace {

// Log density of one observed-space Gaussian mixture.
class MixtureDensity {
 public:
  MixtureDensity(const Scenario& s, int group) {
    for (const auto& c : s.groups[static_cast<std::size_t>(group)]) {
      Term t;
      if (s.loading.size() != 0) {
        t.mean = s.loading * c.mean;
        t.cov_llt = Eigen::LLT<Eigen::MatrixXd>(
            s.loading * c.cov * s.loading.transpose() +
            s.noise_sd * s.noise_sd * Eigen::MatrixXd::Identity(s.loading.rows(), s.loading.rows()));
      } else {
        t.mean = c.mean;
        t.cov_llt = Eigen::LLT<Eigen::MatrixXd>(c.cov);
      }
      const Eigen::MatrixXd l = t.cov_llt.matrixL();
      const double log_det = 2.0 * l.diagonal().array().log().sum();
      const auto d = static_cast<double>(t.mean.size());
      t.log_norm = std::log(c.weight) - 0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det);
      terms_.push_back(std::move(t));
    }
  }

  double operator()(const Eigen::VectorXd& x) const {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> parts;
    parts.reserve(terms_.size());
    for (const auto& t : terms_) {
      const Eigen::VectorXd u = t.cov_llt.matrixL().solve(x - t.mean);
      parts.push_back(t.log_norm - 0.5 * u.squaredNorm());
      best = std::max(best, parts.back());
    }
    double sum = 0.0;
    for (double p : parts) sum += std::exp(p - best);
    return best + std::log(sum);
  }

 private:
  struct Term {
    Eigen::VectorXd mean;
    Eigen::LLT<Eigen::MatrixXd> cov_llt;
    double log_norm = 0.0;
  };
  std::vector<Term> terms_;
};

}  // namespace

std::vector<double> true_log_ratio(const Scenario& scenario, const Sample& points) {
  if (points.cols() != scenario.ambient_dim()) {
    throw DataError("points have " + std::to_string(points.cols()) + " columns, scenario expects " +
                    std::to_string(scenario.ambient_dim()));
  }
  const MixtureDensity p0(scenario, 0);
  const MixtureDensity p1(scenario, 1);
  std::vector<double> out(points.rows());
  Eigen::VectorXd x(static_cast<Eigen::Index>(points.cols()));
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t j = 0; j < points.cols(); ++j) x(static_cast<Eigen::Index>(j)) = points(i, j);
    out[i] = p0(x) - p1(x);
  }
  return out;
}

double symmetrized_mse(std::span<const double> true_lr, std::span<const double> est_lr, std::size_t n0,
                       std::size_t n1) {
  if (true_lr.size() != est_lr.size() || true_lr.size() != n0 + n1) {
    throw DataError("symmetrized_mse: expected " + std::to_string(n0 + n1) + " values, got " +
                    std::to_string(true_lr.size()) + " and " + std::to_string(est_lr.size()));
  }
  if (n0 == 0 || n1 == 0) throw DataError("symmetrized_mse: both groups must be nonempty");
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < n0; ++i) a += (true_lr[i] - est_lr[i]) * (true_lr[i] - est_lr[i]);
  for (std::size_t i = n0; i < n0 + n1; ++i) b += (true_lr[i] - est_lr[i]) * (true_lr[i] - est_lr[i]);
  return a / (2.0 * static_cast<double>(n0)) + b / (2.0 * static_cast<double>(n1));
}

}  // namespace balancetree
