// SPDX-License-Identifier: Apache-2.0
#include "gob/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gob/error.hpp"

namespace gob::diff {

ValueAndGrad value_and_grad(const Objective& objective,
                            const ParamLayout& layout,
                            const Eigen::VectorXd& params) {
  Tape tape;
  BoundParams bound(tape, layout, params);
  Var out = objective(tape, bound);
  ValueAndGrad result;
  result.value = out.scalar();
  tape.backward(out);
  result.grad = bound.gradient();
  return result;
}

double objective_value(const Objective& objective, const ParamLayout& layout,
                       const Eigen::VectorXd& params) {
  Tape tape;
  BoundParams bound(tape, layout, params);
  return objective(tape, bound).scalar();
}

Eigen::VectorXd finite_diff_grad(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& params, double step) {
  if (!(step > 0.0)) throw Error("finite_diff_grad: step must be positive");
  Eigen::VectorXd grad(params.size());
  Eigen::VectorXd p = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + step;
    const double up = objective(p);
    p[i] = orig - step;
    const double down = objective(p);
    p[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

Eigen::VectorXd finite_diff_grad(const Objective& objective,
                                 const ParamLayout& layout,
                                 const Eigen::VectorXd& params, double step) {
  Tape tape;
  return finite_diff_grad(
      [&](const Eigen::VectorXd& p) {
        tape.clear();
        BoundParams bound(tape, layout, p);
        return objective(tape, bound).scalar();
      },
      params, step);
}

GradComparison compare_gradients(const Eigen::VectorXd& analytic,
                                 const Eigen::VectorXd& numeric,
                                 const GradTolerance& tol) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("compare_gradients: size mismatch");
  }
  GradComparison out;
  double worst_score = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double diff = std::abs(a - n);
    const double mag = std::max(std::abs(a), std::abs(n));
    double score;
    if (mag < tol.tiny) {
      out.max_absolute_error = std::max(out.max_absolute_error, diff);
      score = diff / tol.absolute;
    } else {
      const double rel = diff / mag;
      out.max_relative_error = std::max(out.max_relative_error, rel);
      score = rel / tol.relative;
    }
    if (score > worst_score) {
      worst_score = score;
      out.worst_index = i;
    }
  }
  out.passed = worst_score < 1.0;
  return out;
}

}  // namespace gob::diff
