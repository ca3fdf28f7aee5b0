// SPDX-License-Identifier: Apache-2.0
#include "gob/losses/gaussian.hpp"

#include <cmath>

#include "gob/error.hpp"

namespace gob::losses {

DistParams DistVars::column(Eigen::Index col) const {
  DistParams out;
  out.mu = mu.value().col(col);
  out.logvar = logvar.value().col(col);
  return out;
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(sigma_obs > 0.0)) throw ConfigError("sigma_obs must be positive");
}

namespace {

void check_dims(const Eigen::VectorXd& y, const Eigen::VectorXd& mask,
                const DistParams& d) {
  if (y.size() != mask.size() || y.size() != d.mu.size() ||
      y.size() != d.logvar.size()) {
    throw ShapeError("observation, mask and distribution sizes differ");
  }
}

void check_dims(const Tensor2& y, const Tensor2& mask, const DistVars& d) {
  if (y.rows() != mask.rows() || y.cols() != mask.cols() ||
      y.rows() != d.mu.rows() || y.cols() != d.mu.cols() ||
      d.logvar.rows() != d.mu.rows() || d.logvar.cols() != d.mu.cols()) {
    throw ShapeError("observation, mask and distribution shapes differ");
  }
}

}  // namespace

double gauss_negll(const Eigen::VectorXd& y, const Eigen::VectorXd& mask,
                   const DistParams& pred) {
  check_dims(y, mask, pred);
  double total = 0.0;
  for (Eigen::Index d = 0; d < y.size(); ++d) {
    if (mask[d] == 0.0) continue;
    const double r = y[d] - pred.mu[d];
    total += mask[d] * (kHalfLog2Pi + 0.5 * pred.logvar[d] +
                        r * r / (2.0 * std::exp(pred.logvar[d])));
  }
  return total;
}

DistParams gauss_bayes_posterior(const DistParams& pre,
                                 const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& mask,
                                 const LossConfig& cfg) {
  check_dims(y, mask, pre);
  const double var_obs = cfg.sigma_obs * cfg.sigma_obs;
  DistParams out = pre;
  for (Eigen::Index d = 0; d < y.size(); ++d) {
    if (mask[d] == 0.0) continue;
    if (cfg.small_noise_mode) {
      out.mu[d] = y[d];
      out.logvar[d] = std::log(var_obs);
      continue;
    }
    const double var_pre = std::exp(pre.logvar[d]);
    const double total = var_pre + var_obs;
    out.mu[d] = (var_obs * pre.mu[d] + var_pre * y[d]) / total;
    out.logvar[d] = std::log(var_pre * var_obs / total);
  }
  return out;
}

double gauss_kl(double mu1, double var1, double mu2, double var2) {
  if (!(var1 > 0.0) || !(var2 > 0.0)) throw Error("gauss_kl: variances must be positive");
  const double dm = mu1 - mu2;
  return 0.5 * std::log(var2 / var1) + (var1 + dm * dm) / (2.0 * var2) - 0.5;
}

double loss_post(const Eigen::VectorXd& y, const Eigen::VectorXd& mask,
                 const DistParams& pre, const DistParams& post,
                 const LossConfig& cfg) {
  check_dims(y, mask, pre);
  check_dims(y, mask, post);
  const DistParams bayes = gauss_bayes_posterior(pre, y, mask, cfg);
  double total = 0.0;
  for (Eigen::Index d = 0; d < y.size(); ++d) {
    if (mask[d] == 0.0) continue;
    total += mask[d] * gauss_kl(bayes.mu[d], std::exp(bayes.logvar[d]),
                                post.mu[d], std::exp(post.logvar[d]));
  }
  return total;
}

Var gauss_negll(const Tensor2& y, const Tensor2& mask, const DistVars& pred) {
  check_dims(y, mask, pred);
  diff::Tape& tape = pred.mu.tape();
  Var resid = diff::sub(tape.constant(y.cwiseProduct(mask)), pred.mu);
  Var quad = diff::mul(diff::square(resid), diff::exp(diff::affine(pred.logvar, -1.0, 0.0)));
  Var per_entry = diff::lincomb({pred.logvar, quad}, {0.5, 0.5});
  Var masked = diff::masked_sum(per_entry, mask);
  return diff::affine(masked, 1.0, kHalfLog2Pi * mask.sum());
}

DistVars gauss_bayes_posterior(const DistVars& pre, const Tensor2& y,
                               const Tensor2& mask, const LossConfig& cfg) {
  check_dims(y, mask, pre);
  diff::Tape& tape = pre.mu.tape();
  const double var_obs = cfg.sigma_obs * cfg.sigma_obs;
  const Tensor2 y_obs = y.cwiseProduct(mask);
  DistVars out;
  if (cfg.small_noise_mode) {
    out.mu = tape.constant(y_obs);
    out.logvar = tape.constant(y.rows(), y.cols(), std::log(var_obs));
    return out;
  }
  Var var_pre = diff::exp(pre.logvar);
  Var total = diff::affine(var_pre, 1.0, var_obs);
  Var weighted = diff::add(diff::affine(pre.mu, var_obs, 0.0),
                           diff::mul(var_pre, tape.constant(y_obs)));
  out.mu = diff::div(weighted, total);
  out.logvar = diff::log(diff::div(diff::affine(var_pre, var_obs, 0.0), total));
  return out;
}

Var gauss_kl(const DistVars& p, const DistVars& q, const Tensor2& mask) {
  // 0.5 (logvar_q - logvar_p) + 0.5 (var_p + (mu_p - mu_q)^2) / var_q - 0.5
  Var diff_mu = diff::sub(p.mu, q.mu);
  Var spread = diff::add(diff::exp(p.logvar), diff::square(diff_mu));
  Var ratio = diff::mul(spread, diff::exp(diff::affine(q.logvar, -1.0, 0.0)));
  Var per_entry = diff::lincomb({q.logvar, p.logvar, ratio}, {0.5, -0.5, 0.5});
  Var masked = diff::masked_sum(per_entry, mask);
  return diff::affine(masked, 1.0, -0.5 * mask.sum());
}

Var loss_post(const Tensor2& y, const Tensor2& mask, const DistVars& pre,
              const DistVars& post, const LossConfig& cfg) {
  check_dims(y, mask, post);
  const DistVars bayes = gauss_bayes_posterior(pre, y, mask, cfg);
  return gauss_kl(bayes, post, mask);
}

}  // namespace gob::losses
