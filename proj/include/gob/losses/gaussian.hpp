// SPDX-License-Identifier: Apache-2.0
//
// Gaussian observation losses. Every loss only counts observed entries
// (mask == 1). Tape-level versions take D x S matrices (one column per
// series) and return the masked sum over all of them.
#pragma once

#include <Eigen/Core>

#include "gob/diff/tape.hpp"

namespace gob::losses {

using diff::Tensor2;
using diff::Var;

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

/// Per-dimension Gaussian: mean and log-variance.
struct DistParams {
  Eigen::VectorXd mu;
  Eigen::VectorXd logvar;

  Eigen::Index dims() const { return mu.size(); }
  Eigen::VectorXd variance() const { return logvar.array().exp().matrix(); }
  Eigen::VectorXd stddev() const {
    return (0.5 * logvar.array()).exp().matrix();
  }
};

/// Tape counterpart of DistParams; both members are D x S.
struct DistVars {
  Var mu;
  Var logvar;

  /// Column `col` as plain values.
  DistParams column(Eigen::Index col) const;
};

struct LossConfig {
  /// Weight of the post-jump loss.
  double lambda = 1.0;
  /// Observation-noise standard deviation.
  double sigma_obs = 0.01;
  /// Treat the observation distribution as the Bayes posterior.
  bool small_noise_mode = true;

  void validate() const;
};

double gauss_negll(const Eigen::VectorXd& y, const Eigen::VectorXd& mask,
                   const DistParams& pred);

/// Product-of-Gaussians update of `pre` with y ~ N(mu, sigma_obs^2).
/// Unobserved dimensions keep the prior.
DistParams gauss_bayes_posterior(const DistParams& pre,
                                 const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& mask,
                                 const LossConfig& cfg);

/// KL(N(mu1, var1) || N(mu2, var2)).
double gauss_kl(double mu1, double var1, double mu2, double var2);

/// sum_d m_d KL(Bayes_d || post_d).
double loss_post(const Eigen::VectorXd& y, const Eigen::VectorXd& mask,
                 const DistParams& pre, const DistParams& post,
                 const LossConfig& cfg);

Var gauss_negll(const Tensor2& y, const Tensor2& mask, const DistVars& pred);
DistVars gauss_bayes_posterior(const DistVars& pre, const Tensor2& y,
                               const Tensor2& mask, const LossConfig& cfg);
/// Masked sum of KL(p || q) over all entries.
Var gauss_kl(const DistVars& p, const DistVars& q, const Tensor2& mask);
Var loss_post(const Tensor2& y, const Tensor2& mask, const DistVars& pre,
              const DistVars& post, const LossConfig& cfg);

}  // namespace gob::losses
