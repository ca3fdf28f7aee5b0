// SPDX-License-Identifier: Apache-2.0
#include "gob/grubayes/jump.hpp"

#include "gob/error.hpp"

namespace gob::grubayes {

std::string_view to_string(JumpVariant v) {
  switch (v) {
    case JumpVariant::joint:
      return "joint";
    case JumpVariant::seq:
      return "seq";
    case JumpVariant::mlp:
      return "mlp";
  }
  return "?";
}

JumpVariant parse_jump_variant(std::string_view s) {
  if (s == "joint") return JumpVariant::joint;
  if (s == "seq") return JumpVariant::seq;
  if (s == "mlp") return JumpVariant::mlp;
  throw ConfigError("unknown jump variant '" + std::string(s) +
                    "' (expected joint, seq or mlp)");
}

MlpJumpVars MlpJumpVars::bind(const diff::BoundParams& params,
                              std::string_view prefix) {
  const std::string p(prefix);
  return MlpJumpVars{params[p + "w1"], params[p + "b1"], params[p + "w2"],
                     params[p + "b2"]};
}

JumpVars JumpVars::bind(const diff::BoundParams& params,
                        std::string_view prefix, JumpVariant variant,
                        Index prep_size) {
  const std::string p(prefix);
  JumpVars v;
  v.variant = variant;
  v.prep = PrepVars::bind(params, p + "prep_", prep_size);
  if (variant == JumpVariant::mlp) {
    v.mlp = MlpJumpVars::bind(params, p + "mlp_");
  } else {
    v.gru = gruode::GruCellVars::bind(params, p + "gru_");
  }
  return v;
}

void add_jump(diff::ParamLayout& layout, const std::string& prefix,
              JumpVariant variant, Index hidden, Index dims, Index prep_size) {
  add_prep(layout, prefix + "prep_", dims, prep_size);
  const Index input = dims * prep_size;
  if (variant == JumpVariant::mlp) {
    layout.add(prefix + "mlp_w1", hidden, hidden + input);
    layout.add(prefix + "mlp_b1", hidden, 1);
    layout.add(prefix + "mlp_w2", hidden, hidden);
    layout.add(prefix + "mlp_b2", hidden, 1);
  } else {
    gruode::add_gru_cell(layout, prefix + "gru_", hidden, input);
  }
}

namespace {

Var mlp_update(const MlpJumpVars& p, Var h, Var prep) {
  Var in = diff::concat_rows({h, prep});
  Var hidden = diff::tanh(diff::add_bias(diff::matmul(p.w1, in), p.b1));
  return diff::clamp(diff::add_bias(diff::matmul(p.w2, hidden), p.b2), -1.0,
                     1.0);
}

}  // namespace

Var bayes_jump(const JumpVars& jump, const ObsModelVars& obs, const Tensor2& y,
               const Tensor2& mask, Var h, const DistVars* pre,
               const Dropout* dropout) {
  const Index dims = jump.prep.dims();
  check_mask(mask, dims);
  if (y.rows() != dims || y.cols() != mask.cols() || h.cols() != mask.cols()) {
    throw ShapeError("bayes_jump: observation and state shapes differ");
  }
  auto predict = [&](Var state) {
    return pre != nullptr && state.index() == h.index()
               ? *pre
               : f_obs(obs, state, dropout);
  };

  if (jump.variant != JumpVariant::seq) {
    Var prep = f_prep(jump.prep, y, mask, predict(h));
    if (jump.variant == JumpVariant::mlp) return mlp_update(jump.mlp, h, prep);
    return gruode::discrete_gru_step(jump.gru, h, prep);
  }

  const Index s = mask.cols();
  Var state = h;
  for (Index d = 0; d < dims; ++d) {
    if (mask.row(d).sum() == 0.0) continue;
    Tensor2 only_d = Tensor2::Zero(dims, s);
    only_d.row(d) = mask.row(d);
    Var prep = f_prep(jump.prep, y, only_d, predict(state));
    Var next = gruode::discrete_gru_step(jump.gru, state, prep);
    if ((mask.row(d).array() == 1.0).all()) {
      state = next;
      continue;
    }
    // Columns that do not observe d keep their state.
    Tensor2 keep(h.rows(), s);
    keep.rowwise() = mask.row(d);
    Tensor2 skip = Tensor2::Ones(h.rows(), s) - keep;
    state = diff::mul_const(next, keep) + diff::mul_const(state, skip);
  }
  return state;
}

}  // namespace gob::grubayes
