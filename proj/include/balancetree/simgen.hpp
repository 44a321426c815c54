#pragma once

// Simulation scenarios with closed-form log density ratios.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "balancetree/data.hpp"

namespace balancetree {

enum class ScenarioKind {
  global_shift_2d,
  local_shift_2d,
  local_dispersion_2d,
  latent_location_20d,
  latent_dispersion_20d,
};

std::string_view to_string(ScenarioKind kind);
ScenarioKind parse_scenario(std::string_view name);
inline constexpr std::array<ScenarioKind, 5> kAllScenarios = {
    ScenarioKind::global_shift_2d, ScenarioKind::local_shift_2d, ScenarioKind::local_dispersion_2d,
    ScenarioKind::latent_location_20d, ScenarioKind::latent_dispersion_20d};

// Mixture parameters. 2x2 covariances are given as (s11, s12, s22).
namespace scenario_params {

inline constexpr std::array<double, 2> kGlobalMean0 = {-0.5, -0.5};
inline constexpr std::array<double, 2> kGlobalMean1 = {0.5, 0.5};

inline constexpr std::array<std::array<double, 2>, 5> kLocalShiftMeans = {
    {{9.0, 9.9}, {-2.5, 1.4}, {-2.3, -9.7}, {3.4, 5.9}, {5.8, -9.5}}};
inline constexpr std::array<std::array<double, 3>, 5> kLocalShiftCovs = {
    {{2.9, 0.5, 1.1}, {1.2, -0.6, 2.8}, {2.3, -1.0, 1.7}, {1.1, -0.4, 2.9}, {3.0, 0.2, 1.0}}};
inline constexpr std::array<double, 2> kLocalShiftDelta = {0.0, 1.0};

inline constexpr std::array<std::array<double, 2>, 3> kLocalDispersionMeans = {
    {{1.9, -7.2}, {-5.7, 5.3}, {-2.3, -1.5}}};
inline constexpr std::array<std::array<double, 3>, 3> kLocalDispersionCovs = {
    {{1.0, -0.4, 0.8}, {1.3, 0.7, 2.7}, {1.0, 0.0, 3.0}}};
inline constexpr std::array<double, 2> kLocalDispersionDelta = {0.36, 1.0};

inline constexpr std::size_t kLatentDim = 4;
inline constexpr std::size_t kAmbientDim = 20;
inline constexpr double kNoiseSd = 0.1;
inline constexpr double kLatentMajorWeight = 0.8;
inline constexpr std::array<double, 4> kLatentLocationMean = {-0.5, 0.0, 0.0, 0.0};
inline constexpr std::array<double, 4> kLatentLocationDelta = {1.0, 0.0, 0.0, 0.0};
inline constexpr std::array<double, 4> kLatentDispersionDelta = {0.5, 1.0, 1.0, 1.0};
inline constexpr double kLatentWideVariance = 4.0;

}  // namespace scenario_params

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Two Gaussian mixtures, optionally observed through x = loading * z + noise.
struct Scenario {
  ScenarioKind kind = ScenarioKind::global_shift_2d;
  std::array<std::vector<GaussianComponent>, 2> groups;
  /// Empty for 2D scenarios.
  Eigen::MatrixXd loading;
  double noise_sd = 0.0;

  std::size_t latent_dim() const { return static_cast<std::size_t>(groups[0].front().mean.size()); }
  std::size_t ambient_dim() const {
    return loading.size() == 0 ? latent_dim() : static_cast<std::size_t>(loading.rows());
  }
  Scenario swapped() const;
};

/// `loading_seed` drives the random orthonormal loading of the 20D scenarios.
/// With `null_effect` both groups share the group-0 mixture.
Scenario make_scenario(ScenarioKind kind, std::uint64_t loading_seed = 0, bool null_effect = false);

/// Random orthonormal rows x cols matrix (Gram-Schmidt on Gaussian columns).
Eigen::MatrixXd random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed);

TwoSampleDataset generate(const Scenario& scenario, std::size_t n0, std::size_t n1, std::uint64_t seed);

/// log p0(x) - log p1(x) at every row of points.
std::vector<double> true_log_ratio(const Scenario& scenario, const Sample& points);

/// (1/2n0) sum over the first n0 entries plus (1/2n1) sum over the last n1
/// entries of the squared differences.
double symmetrized_mse(std::span<const double> true_lr, std::span<const double> est_lr, std::size_t n0,
                       std::size_t n1);

}  // namespace balancetree
