// SPDX-License-Identifier: Apache-2.0
//
// Forecasting from a trained model and forecast scoring against held-out
// observations.
#pragma once

#include <span>
#include <vector>

#include "gob/data/series.hpp"
#include "gob/losses/gaussian.hpp"
#include "gob/solvers/integrate.hpp"
#include "gob/trainer/model.hpp"

namespace gob::trainer {

/// Anything that maps a conditioning history to per-dimension Gaussians at
/// later query times.
class Predictor {
 public:
  virtual ~Predictor() = default;
  /// `history` only holds observations with t <= t_cond; queries >= t_cond.
  virtual std::vector<losses::DistParams> predict(
      const data::SporadicSeries& history, double t_cond,
      std::span<const double> queries) const = 0;
};

/// Filters on the observations with t <= t_cond, then integrates without
/// jumps and reads f_obs at each query time (in any order, all >= t_cond).
std::vector<losses::DistParams> forecast(const ModelParams& model,
                                         const data::SporadicSeries& s,
                                         double t_cond,
                                         std::span<const double> queries,
                                         const solvers::SolverConfig& solver);

class ModelPredictor : public Predictor {
 public:
  ModelPredictor(const ModelParams& model, solvers::SolverConfig solver)
      : model_(&model), solver_(solver) {}

  std::vector<losses::DistParams> predict(
      const data::SporadicSeries& history, double t_cond,
      std::span<const double> queries) const override;

 private:
  const ModelParams* model_;
  solvers::SolverConfig solver_;
};

struct Metrics {
  double mse = 0.0;
  /// Mean Gaussian negative log-likelihood per observed entry.
  double negll = 0.0;
  std::size_t entries = 0;
  std::size_t series = 0;
};

/// Conditions on observations with t < t_split and scores every observed
/// entry at t >= t_split. Throws when nothing falls in the window.
Metrics evaluate(const Predictor& predictor, const data::Dataset& test,
                 double t_split, unsigned threads = 1);

}  // namespace gob::trainer
