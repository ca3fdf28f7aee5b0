// SPDX-License-Identifier: Apache-2.0
//
// Jump update of the hidden state at an observation.
#pragma once

#include <string>
#include <string_view>

#include "gob/grubayes/observation.hpp"
#include "gob/gruode/cell.hpp"

namespace gob::grubayes {

enum class JumpVariant { joint, seq, mlp };

std::string_view to_string(JumpVariant v);
JumpVariant parse_jump_variant(std::string_view s);

/// tanh(W1 [h; prep] + b1) -> W2 . + b2, followed by a clamp to [-1, 1].
struct MlpJumpVars {
  Var w1, b1, w2, b2;

  static MlpJumpVars bind(const diff::BoundParams& params,
                          std::string_view prefix);
};

struct JumpVars {
  JumpVariant variant = JumpVariant::joint;
  /// Discrete GRU with input size D p (joint and seq).
  gruode::GruCellVars gru;
  MlpJumpVars mlp;
  PrepVars prep;

  static JumpVars bind(const diff::BoundParams& params, std::string_view prefix,
                       JumpVariant variant, Index prep_size = kPrepSize);
};

/// Registers `<prefix>prep_*` and either `<prefix>gru_*` or `<prefix>mlp_*`.
/// The perceptron's hidden layer has `hidden` units.
void add_jump(diff::ParamLayout& layout, const std::string& prefix,
              JumpVariant variant, Index hidden, Index dims,
              Index prep_size = kPrepSize);

/// h+ from h- and the observation (y, mask), both D x S. `pre` may carry
/// f_obs(h) when the caller has it already; it is recomputed otherwise.
/// For seq the observed dimensions of each column are absorbed one at a
/// time in ascending order, with f_obs re-evaluated before each.
Var bayes_jump(const JumpVars& jump, const ObsModelVars& obs, const Tensor2& y,
               const Tensor2& mask, Var h, const DistVars* pre = nullptr,
               const Dropout* dropout = nullptr);

}  // namespace gob::grubayes
