// SPDX-License-Identifier: Apache-2.0
//
// Synthetic ground truth: a correlated multivariate Ornstein-Uhlenbeck
// process and a stochastic Brusselator, both simulated by Euler-Maruyama on a
// fine grid and observed sporadically.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gob/data/series.hpp"

namespace gob::sde {

/// dY = theta (r - Y) dt + sigma L dW, with L L^T the equicorrelation matrix
/// of coefficient rho.
struct OUParams {
  double theta = 1.0;
  Eigen::VectorXd r = Eigen::VectorXd::Zero(2);
  double sigma = 0.1;
  double rho = 0.99;

  Eigen::Index dims() const { return r.size(); }
  void validate() const;
};

/// dx = [1 - (b + 1) x + a x^2 y] dt + sigma dW1,
/// dy = [b x - a x^2 y] dt + sigma dW2.
struct BrusselatorParams {
  double a = 0.3;
  double b = 1.4;
  double sigma = 0.1;
  double rho = 0.9;

  void validate() const;
  Eigen::Vector2d fixed_point() const { return {1.0, b / a}; }
};

struct SamplingSpec {
  double horizon = 10.0;
  /// Poisson mean of the number of observation times (at least one is kept).
  double mean_obs = 20.0;
  /// Independent inclusion probability of each dimension at a time.
  double obs_prob = 0.5;
  /// Uniform range of the time shift applied to the emitted times.
  double lag_min = 0.0;
  double lag_max = 0.0;
  double dt_sim = 1e-3;

  void validate() const;
};

/// Lower-triangular factor of the dims x dims equicorrelation matrix. Zero
/// pivots (rho = 1) give zero columns instead of failing.
Eigen::MatrixXd correlation_factor(Eigen::Index dims, double rho);

std::uint64_t splitmix64(std::uint64_t x);
/// Seed of the stream for series `index` under dataset seed `seed`.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

struct Moments {
  Eigen::VectorXd mean;
  /// Marginal variance of every dimension.
  Eigen::VectorXd variance;
};

/// Distribution of Y(t) given Y(t_star) = y_star.
Moments ou_conditional_moments(const Eigen::VectorXd& y_star, double t_star,
                               double t, const OUParams& p);

/// States at the grid points nearest to `probe_times` (sorted, >= 0) of one
/// Euler-Maruyama path started at y0 at time 0.
data::Matrix ou_path(const OUParams& p, const Eigen::VectorXd& y0,
                     const std::vector<double>& probe_times, double dt_sim,
                     std::mt19937_64& rng);

Eigen::Vector2d brusselator_drift(const BrusselatorParams& p,
                                  const Eigen::Vector2d& s);
/// Brusselator counterpart of ou_path. Throws SolverError when the state
/// magnitude exceeds 1e6.
data::Matrix brusselator_path(const BrusselatorParams& p,
                              const Eigen::Vector2d& y0,
                              const std::vector<double>& probe_times,
                              double dt_sim, std::mt19937_64& rng);

/// Sporadic observation of one OU path; y0 defaults to a stationary draw.
data::SporadicSeries simulate_ou(const OUParams& p, const SamplingSpec& spec,
                                 const std::optional<Eigen::VectorXd>& y0,
                                 std::mt19937_64& rng, double* lag = nullptr);
data::SporadicSeries simulate_brusselator(const BrusselatorParams& p,
                                          const SamplingSpec& spec,
                                          const Eigen::Vector2d& y0,
                                          std::mt19937_64& rng);

enum class Setting { random_r, random_lag, rho0, brusselator };

std::string_view to_string(Setting s);
Setting parse_setting(std::string_view s);

/// Generating parameters of one series.
struct SeriesTruth {
  OUParams ou;
  double lag = 0.0;
};

struct GeneratedDataset {
  data::Dataset series;
  /// Per-series truth for the OU settings; empty for brusselator.
  std::vector<SeriesTruth> truth;
  std::vector<std::pair<std::string, std::string>> metadata;
};

/// Series ids are `<first_id + i>`. Output is a pure function of
/// (setting, n, seed, first_id).
GeneratedDataset make_dataset(Setting setting, std::size_t n,
                              std::uint64_t seed, std::size_t first_id = 0);

/// Default series count of a setting.
std::size_t default_size(Setting setting);

void write_metadata(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::string>>& metadata);
std::vector<std::pair<std::string, std::string>> read_metadata(
    const std::filesystem::path& path);

}  // namespace gob::sde
