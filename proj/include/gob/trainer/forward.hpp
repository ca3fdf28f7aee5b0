// SPDX-License-Identifier: Apache-2.0
//
// Filtering forward pass: propagate to each observation time, score the
// prediction, jump, score the updated prediction.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gob/data/series.hpp"
#include "gob/losses/gaussian.hpp"
#include "gob/solvers/integrate.hpp"
#include "gob/trainer/model.hpp"

namespace gob::trainer {

struct ForwardConfig {
  solvers::SolverConfig solver;
  losses::LossConfig loss;
  grubayes::Dropout dropout;
  /// Time at which every series starts from h0.
  double t_start = 0.0;
  bool log_events = false;
};

struct Event {
  double time = 0.0;
  /// Position of the series in the batch (0 for single-series passes).
  std::size_t series = 0;
  Index row = 0;
  double loss_pre = 0.0;
  double loss_post = 0.0;
  Eigen::VectorXd h_pre;
  Eigen::VectorXd h_post;
};

struct ForwardResult {
  /// loss_pre + lambda * loss_post (1 x 1).
  Var loss;
  Var loss_pre;
  Var loss_post;
  /// Hidden state at the end time, H x (number of series).
  Var h_end;
  std::size_t observed_entries = 0;
  std::size_t solver_steps = 0;
  std::vector<Event> events;
};

/// Hidden-state evolution from t0 to t1 under the model's propagation mode.
Var propagate(const BoundModel& m, Var h, double t0, double t1,
              const solvers::SolverConfig& solver,
              std::size_t* steps = nullptr);

/// Single-series pass. `t_end` defaults to the last observation time.
/// Integration restarts at every entry of `breakpoints` (sorted) so that a
/// fixed grid can be aligned with another pass.
ForwardResult forward_pass(const BoundModel& m, const data::SporadicSeries& s,
                           std::optional<double> t_end,
                           const ForwardConfig& cfg,
                           std::span<const double> breakpoints = {});

/// Joint pass over `batch` (indices into ds) on the batch timeline: all
/// columns propagate together between consecutive unique times and only the
/// observed columns jump. `t_end` defaults to the last timeline time.
ForwardResult forward_batch(const BoundModel& m, const data::Dataset& ds,
                            const std::vector<std::size_t>& batch,
                            std::optional<double> t_end,
                            const ForwardConfig& cfg);

}  // namespace gob::trainer
