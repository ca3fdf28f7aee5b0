// SPDX-License-Identifier: Apache-2.0
//
// Observation processing: the observation model mapping hidden states to
// Gaussian parameters, and the masked per-dimension preprocessing that feeds
// the jump network.
#pragma once

#include <random>
#include <string>
#include <string_view>

#include "gob/diff/params.hpp"
#include "gob/losses/gaussian.hpp"

namespace gob::grubayes {

using diff::Index;
using diff::Tensor2;
using diff::Var;
using losses::DistVars;

inline constexpr Index kObsHidden = 25;
inline constexpr Index kPrepSize = 10;

/// Two-layer perceptron H -> hidden (ReLU) -> 2D, the first D outputs being
/// means and the last D log-variances.
struct ObsModelVars {
  Var w1, b1, w2, b2;

  Index dims() const { return w2.rows() / 2; }
  static ObsModelVars bind(const diff::BoundParams& params,
                           std::string_view prefix);
};

void add_obs_model(diff::ParamLayout& layout, const std::string& prefix,
                   Index hidden, Index dims, Index obs_hidden = kObsHidden);

/// Inverted dropout on the observation model's hidden layer.
struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  bool active() const { return rate > 0.0 && rng != nullptr; }
};

DistVars f_obs(const ObsModelVars& p, Var h, const Dropout* dropout = nullptr);

/// Per-dimension weights stacked as (D p) x 4 and biases as (D p) x 1;
/// rows [d p, (d + 1) p) belong to dimension d.
struct PrepVars {
  Var w, b;
  Index prep_size = kPrepSize;

  Index dims() const { return w.rows() / prep_size; }
  static PrepVars bind(const diff::BoundParams& params, std::string_view prefix,
                       Index prep_size);
};

void add_prep(diff::ParamLayout& layout, const std::string& prefix, Index dims,
              Index prep_size = kPrepSize);

/// Jump input of size (D p) x S. For dimension d the block is
/// m_d * ReLU(W_d [mu_d, logvar_d, y_d, (y_d - mu_d) / sigma_d] + b_d).
/// Unobserved entries of y are zeroed before use.
Var f_prep(const PrepVars& p, const Tensor2& y, const Tensor2& mask,
           const DistVars& pred);
Var f_prep(const PrepVars& p, const Tensor2& y, const Tensor2& mask, Var h,
           const ObsModelVars& obs);

/// Throws unless mask is D x S with entries in {0, 1} and at least one
/// observed dimension per column.
void check_mask(const Tensor2& mask, Index dims);

}  // namespace gob::grubayes
