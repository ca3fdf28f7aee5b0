// SPDX-License-Identifier: Apache-2.0
#include "gob/gruode/cell.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gob/error.hpp"

namespace gob::gruode {

using diff::Index;

std::string_view to_string(CellVariant v) {
  return v == CellVariant::full ? "full" : "minimal";
}

CellVariant parse_cell_variant(std::string_view s) {
  if (s == "full") return CellVariant::full;
  if (s == "minimal") return CellVariant::minimal;
  throw ConfigError("unknown cell variant '" + std::string(s) + "'");
}

namespace {

std::string key(std::string_view prefix, const char* name) {
  std::string k(prefix);
  k += name;
  return k;
}

// W x + U h + b, with the W x term dropped for autonomous cells.
Var preactivation(Var w, Var u, Var b, Var h, const std::optional<Var>& x) {
  Var acc = diff::matmul(u, h);
  if (x && w.valid()) acc = diff::add(diff::matmul(w, *x), acc);
  return diff::add_bias(acc, b);
}

void check_state(Var u, Var h) {
  if (h.rows() != u.rows()) {
    throw ShapeError("hidden state has " + std::to_string(h.rows()) +
                     " rows, cell expects " + std::to_string(u.rows()));
  }
}

void check_input(Var w, const std::optional<Var>& x) {
  if (!x) return;
  if (!w.valid()) throw ShapeError("input given to an autonomous cell");
  if (x->rows() != w.cols()) {
    throw ShapeError("input has " + std::to_string(x->rows()) +
                     " rows, cell expects " + std::to_string(w.cols()));
  }
}

}  // namespace

GruCellVars GruCellVars::bind(const diff::BoundParams& params,
                              std::string_view prefix) {
  GruCellVars v;
  v.w_r = params.get(key(prefix, "w_r"));
  v.w_z = params.get(key(prefix, "w_z"));
  v.w_h = params.get(key(prefix, "w_h"));
  v.u_r = params[key(prefix, "u_r")];
  v.u_z = params[key(prefix, "u_z")];
  v.u_h = params[key(prefix, "u_h")];
  v.b_r = params[key(prefix, "b_r")];
  v.b_z = params[key(prefix, "b_z")];
  v.b_h = params[key(prefix, "b_h")];
  return v;
}

MinimalCellVars MinimalCellVars::bind(const diff::BoundParams& params,
                                      std::string_view prefix) {
  MinimalCellVars v;
  v.w_f = params.get(key(prefix, "w_f"));
  v.w_h = params.get(key(prefix, "w_h"));
  v.u_f = params[key(prefix, "u_f")];
  v.u_h = params[key(prefix, "u_h")];
  v.b_f = params[key(prefix, "b_f")];
  v.b_h = params[key(prefix, "b_h")];
  return v;
}

OdeCellVars OdeCellVars::bind(const diff::BoundParams& params,
                              std::string_view prefix, CellVariant variant) {
  OdeCellVars v;
  v.variant = variant;
  if (variant == CellVariant::full) {
    v.full = GruCellVars::bind(params, prefix);
  } else {
    v.minimal = MinimalCellVars::bind(params, prefix);
  }
  return v;
}

void add_gru_cell(diff::ParamLayout& layout, const std::string& prefix,
                  Index hidden, Index input_dim) {
  if (input_dim > 0) {
    for (const char* n : {"w_r", "w_z", "w_h"}) {
      layout.add(prefix + n, hidden, input_dim);
    }
  }
  for (const char* n : {"u_r", "u_z", "u_h"}) layout.add(prefix + n, hidden, hidden);
  for (const char* n : {"b_r", "b_z", "b_h"}) layout.add(prefix + n, hidden, 1);
}

void add_minimal_cell(diff::ParamLayout& layout, const std::string& prefix,
                      Index hidden, Index input_dim) {
  if (input_dim > 0) {
    for (const char* n : {"w_f", "w_h"}) layout.add(prefix + n, hidden, input_dim);
  }
  for (const char* n : {"u_f", "u_h"}) layout.add(prefix + n, hidden, hidden);
  for (const char* n : {"b_f", "b_h"}) layout.add(prefix + n, hidden, 1);
}

void add_ode_cell(diff::ParamLayout& layout, const std::string& prefix,
                  CellVariant variant, Index hidden, Index input_dim) {
  if (variant == CellVariant::full) {
    add_gru_cell(layout, prefix, hidden, input_dim);
  } else {
    add_minimal_cell(layout, prefix, hidden, input_dim);
  }
}

Gates gru_gates(const GruCellVars& p, Var h, const std::optional<Var>& x) {
  check_state(p.u_z, h);
  check_input(p.w_z, x);
  Gates out;
  out.r = diff::sigmoid(preactivation(p.w_r, p.u_r, p.b_r, h, x));
  out.z = diff::sigmoid(preactivation(p.w_z, p.u_z, p.b_z, h, x));
  out.g = diff::tanh(preactivation(p.w_h, p.u_h, p.b_h, diff::mul(out.r, h), x));
  return out;
}

Var vector_field(const GruCellVars& p, Var h, const std::optional<Var>& x) {
  const Gates gates = gru_gates(p, h, x);
  return diff::mul(diff::one_minus(gates.z), diff::sub(gates.g, h));
}

namespace {

struct MinimalGates {
  Var f;
  Var candidate;
};

MinimalGates minimal_gates(const MinimalCellVars& p, Var h,
                           const std::optional<Var>& x) {
  check_state(p.u_f, h);
  check_input(p.w_f, x);
  MinimalGates out;
  out.f = diff::sigmoid(preactivation(p.w_f, p.u_f, p.b_f, h, x));
  out.candidate =
      diff::sigmoid(preactivation(p.w_h, p.u_h, p.b_h, diff::mul(h, out.f), x));
  return out;
}

}  // namespace

Var vector_field(const MinimalCellVars& p, Var h, const std::optional<Var>& x) {
  const MinimalGates gates = minimal_gates(p, h, x);
  return diff::mul(diff::one_minus(gates.f), diff::sub(gates.candidate, h));
}

Var vector_field(const OdeCellVars& p, Var h, const std::optional<Var>& x) {
  return p.variant == CellVariant::full ? vector_field(p.full, h, x)
                                        : vector_field(p.minimal, h, x);
}

Var discrete_gru_step(const GruCellVars& p, Var h,
                      const std::optional<Var>& x) {
  const Gates gates = gru_gates(p, h, x);
  return diff::add(diff::mul(gates.z, h),
                   diff::mul(diff::one_minus(gates.z), gates.g));
}

Var discrete_minimal_step(const MinimalCellVars& p, Var h,
                          const std::optional<Var>& x) {
  const MinimalGates gates = minimal_gates(p, h, x);
  return diff::add(diff::mul(gates.f, h),
                   diff::mul(diff::one_minus(gates.f), gates.candidate));
}

Var discrete_step(const OdeCellVars& p, Var h, const std::optional<Var>& x) {
  return p.variant == CellVariant::full ? discrete_gru_step(p.full, h, x)
                                        : discrete_minimal_step(p.minimal, h, x);
}

std::size_t bin_count(double t0, double t1, double bin_width) {
  if (!(bin_width > 0.0)) throw Error("bin width must be positive");
  if (t1 < t0) throw Error("propagation end time precedes start time");
  const double ratio = (t1 - t0) / bin_width;
  // Absorb representation error so that e.g. 0.3 / 0.1 counts as 3 bins.
  return static_cast<std::size_t>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
}

Var discretized_propagate(const OdeCellVars& p, Var h, double t0, double t1,
                          double bin_width) {
  const std::size_t n = bin_count(t0, t1, bin_width);
  for (std::size_t i = 0; i < n; ++i) h = discrete_step(p, h, std::nullopt);
  return h;
}

}  // namespace gob::gruode
