// SPDX-License-Identifier: Apache-2.0
#include "gob/grubayes/observation.hpp"

#include <array>
#include <string>

#include "gob/error.hpp"

namespace gob::grubayes {

namespace {

std::string key(std::string_view prefix, const char* name) {
  std::string k(prefix);
  k += name;
  return k;
}

}  // namespace

ObsModelVars ObsModelVars::bind(const diff::BoundParams& params,
                                std::string_view prefix) {
  return ObsModelVars{params[key(prefix, "w1")], params[key(prefix, "b1")],
                      params[key(prefix, "w2")], params[key(prefix, "b2")]};
}

void add_obs_model(diff::ParamLayout& layout, const std::string& prefix,
                   Index hidden, Index dims, Index obs_hidden) {
  layout.add(prefix + "w1", obs_hidden, hidden);
  layout.add(prefix + "b1", obs_hidden, 1);
  layout.add(prefix + "w2", 2 * dims, obs_hidden);
  layout.add(prefix + "b2", 2 * dims, 1);
}

DistVars f_obs(const ObsModelVars& p, Var h, const Dropout* dropout) {
  if (h.rows() != p.w1.cols()) {
    throw ShapeError("f_obs: hidden state has " + std::to_string(h.rows()) +
                     " rows, model expects " + std::to_string(p.w1.cols()));
  }
  Var hidden = diff::relu(diff::add_bias(diff::matmul(p.w1, h), p.b1));
  if (dropout != nullptr && dropout->active()) {
    const double keep = 1.0 - dropout->rate;
    std::bernoulli_distribution draw(keep);
    Tensor2 mask(hidden.rows(), hidden.cols());
    for (Index i = 0; i < mask.size(); ++i) {
      mask.data()[i] = draw(*dropout->rng) ? 1.0 / keep : 0.0;
    }
    hidden = diff::mul_const(hidden, mask);
  }
  Var out = diff::add_bias(diff::matmul(p.w2, hidden), p.b2);
  const Index d = p.dims();
  return DistVars{diff::slice_rows(out, 0, d), diff::slice_rows(out, d, d)};
}

PrepVars PrepVars::bind(const diff::BoundParams& params,
                        std::string_view prefix, Index prep_size) {
  PrepVars v{params[key(prefix, "w")], params[key(prefix, "b")], prep_size};
  if (v.w.rows() % prep_size != 0 || v.w.cols() != 4) {
    throw ShapeError("prep weights must be (D p) x 4");
  }
  return v;
}

void add_prep(diff::ParamLayout& layout, const std::string& prefix, Index dims,
              Index prep_size) {
  layout.add(prefix + "w", dims * prep_size, 4);
  layout.add(prefix + "b", dims * prep_size, 1);
}

void check_mask(const Tensor2& mask, Index dims) {
  if (mask.rows() != dims) {
    throw ShapeError("mask has " + std::to_string(mask.rows()) +
                     " rows, expected " + std::to_string(dims));
  }
  for (Index c = 0; c < mask.cols(); ++c) {
    double observed = 0.0;
    for (Index d = 0; d < dims; ++d) {
      const double m = mask(d, c);
      if (m != 0.0 && m != 1.0) throw DataError("mask entries must be 0 or 1");
      observed += m;
    }
    if (observed == 0.0) {
      throw DataError("observation with an all-zero mask");
    }
  }
}

Var f_prep(const PrepVars& p, const Tensor2& y, const Tensor2& mask,
           const DistVars& pred) {
  const Index dims = p.dims();
  if (y.rows() != dims || mask.rows() != dims || y.cols() != mask.cols() ||
      pred.mu.rows() != dims || pred.mu.cols() != y.cols()) {
    throw ShapeError("f_prep: observation shapes do not match the model");
  }
  diff::Tape& tape = pred.mu.tape();
  const Index s = y.cols();
  const Index ps = p.prep_size;
  Var y_obs = tape.constant(y.cwiseProduct(mask));
  Var error = diff::mul(diff::sub(y_obs, pred.mu),
                        diff::exp(diff::affine(pred.logvar, -0.5, 0.0)));
  std::vector<Var> blocks;
  blocks.reserve(static_cast<std::size_t>(dims));
  Tensor2 block_mask(dims * ps, s);
  for (Index d = 0; d < dims; ++d) {
    Var q = diff::concat_rows({diff::slice_rows(pred.mu, d, 1),
                               diff::slice_rows(pred.logvar, d, 1),
                               diff::slice_rows(y_obs, d, 1),
                               diff::slice_rows(error, d, 1)});
    Var w_d = diff::slice_rows(p.w, d * ps, ps);
    Var b_d = diff::slice_rows(p.b, d * ps, ps);
    blocks.push_back(diff::relu(diff::add_bias(diff::matmul(w_d, q), b_d)));
    block_mask.middleRows(d * ps, ps).rowwise() = mask.row(d);
  }
  return diff::mul_const(diff::concat_rows(blocks), block_mask);
}

Var f_prep(const PrepVars& p, const Tensor2& y, const Tensor2& mask, Var h,
           const ObsModelVars& obs) {
  return f_prep(p, y, mask, f_obs(obs, h));
}

}  // namespace gob::grubayes
