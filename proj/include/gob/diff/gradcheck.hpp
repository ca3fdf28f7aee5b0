// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include <Eigen/Core>

#include "gob/diff/params.hpp"
#include "gob/diff/tape.hpp"

namespace gob::diff {

/// Scalar objective built from tape primitives over bound parameters.
using Objective = std::function<Var(Tape&, const BoundParams&)>;

struct ValueAndGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

ValueAndGrad value_and_grad(const Objective& objective,
                            const ParamLayout& layout,
                            const Eigen::VectorXd& params);

/// Forward evaluation only.
double objective_value(const Objective& objective, const ParamLayout& layout,
                       const Eigen::VectorXd& params);

/// Central differences (f(p + step e_i) - f(p - step e_i)) / (2 step).
Eigen::VectorXd finite_diff_grad(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& params, double step);

Eigen::VectorXd finite_diff_grad(const Objective& objective,
                                 const ParamLayout& layout,
                                 const Eigen::VectorXd& params, double step);

struct GradTolerance {
  double relative = 1e-4;
  /// Used instead of `relative` when both magnitudes are below `tiny`.
  double absolute = 1e-7;
  double tiny = 1e-3;
};

struct GradComparison {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  Eigen::Index worst_index = -1;
  bool passed = true;
};

GradComparison compare_gradients(const Eigen::VectorXd& analytic,
                                 const Eigen::VectorXd& numeric,
                                 const GradTolerance& tol = {});

}  // namespace gob::diff
