// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>

#include "doctest.h"
#include "gob/diff/gradcheck.hpp"
#include "gob/diff/params.hpp"
#include "gob/diff/tape.hpp"

namespace gob::test {

using diff::Tensor2;

inline Tensor2 uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                       double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor2 m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Eigen::VectorXd uniform_vec(Eigen::Index n, std::mt19937_64& rng,
                                   double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

/// Max relative error of the tape gradient against central differences.
inline diff::GradComparison check_objective(const diff::Objective& f,
                                            const diff::ParamLayout& layout,
                                            const Eigen::VectorXd& theta,
                                            double step = 1e-6,
                                            diff::GradTolerance tol = {}) {
  const auto vg = diff::value_and_grad(f, layout, theta);
  const auto fd = diff::finite_diff_grad(f, layout, theta, step);
  return diff::compare_gradients(vg.grad, fd, tol);
}

}  // namespace gob::test
