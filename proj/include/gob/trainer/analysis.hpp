// SPDX-License-Identifier: Apache-2.0
//
// Diagnostics on trained models: Euler versus adaptive step counts, and the
// effect of observing one dimension on the prediction of another.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gob/data/series.hpp"
#include "gob/diff/gradcheck.hpp"
#include "gob/solvers/integrate.hpp"
#include "gob/trainer/forward.hpp"
#include "gob/trainer/model.hpp"

namespace gob::trainer {

struct SolverRun {
  solvers::Method method = solvers::Method::euler;
  /// dt for fixed-step methods, rtol for dopri.
  double setting = 0.0;
  std::size_t steps = 0;
  std::size_t field_evals = 0;
  /// Max-abs difference of the terminal hidden state from the reference.
  double terminal_error = 0.0;
};

struct SolverComparison {
  std::vector<SolverRun> runs;
  /// Cheapest run of each method with terminal_error <= target.
  std::optional<SolverRun> best_euler;
  std::optional<SolverRun> best_dopri;
  double target_error = 1e-3;
};

inline const std::vector<double> kEulerLadder = {0.5,  0.2,   0.1,   0.05, 0.02,
                                                 0.01, 0.005, 0.002, 0.001};
inline const std::vector<double> kDopriLadder = {1e-1, 1e-2, 1e-3, 1e-4,
                                                 1e-5, 1e-6, 1e-7, 1e-8};

/// Filters `s` up to t_end with every ladder setting (dopri uses atol =
/// rtol / 10) and compares h(t_end) with a dopri run at rtol 1e-11.
SolverComparison compare_solvers(const ModelParams& model,
                                 const data::SporadicSeries& s, double t_end,
                                 double target_error = 1e-3);

struct CrossUpdate {
  /// Mean |mu_target(h+) - mu_target(h-)| over the selected events.
  double mean_shift = 0.0;
  std::size_t events = 0;
};

/// For each series, the first observation at t >= t_min where exactly
/// `observed` is seen, measuring the jump in the predicted mean of
/// `target`. At most `max_series` series contribute.
CrossUpdate cross_dimension_update(const ModelParams& model,
                                   const data::Dataset& ds, Index observed,
                                   Index target, double t_min,
                                   std::size_t max_series,
                                   const solvers::SolverConfig& solver);

struct PipelineGradcheck {
  double loss = 0.0;
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
  diff::GradComparison comparison;
};

/// Tape gradient of the forward-pass loss of `s` against central
/// differences over every parameter.
PipelineGradcheck pipeline_gradcheck(const ModelParams& model,
                                     const data::SporadicSeries& s,
                                     const ForwardConfig& cfg,
                                     double step = 1e-6,
                                     const diff::GradTolerance& tol = {});

}  // namespace gob::trainer
