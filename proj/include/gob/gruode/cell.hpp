// SPDX-License-Identifier: Apache-2.0
//
// Continuous-time GRU cells.
//
// The full cell integrates dh/dt = (1 - z) * (g - h) with the usual reset
// gate r, update gate z and candidate g = tanh(W_h x + U_h (r * h) + b_h).
// The minimal cell integrates dh/dt = (1 - f) * (sigmoid(W_h x +
// U_h (h * f) + b_h) - h). Both keep h inside [-1, 1]: at h_j = 1 the field
// is <= 0 and at h_j = -1 it is >= 0.
//
// Hidden states are H x S matrices (one column per series). Cells built with
// input_dim == 0 are autonomous and carry no W_* matrices at all.
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "gob/diff/params.hpp"
#include "gob/diff/tape.hpp"

namespace gob::gruode {

using diff::Var;

enum class CellVariant { full, minimal };

std::string_view to_string(CellVariant v);
CellVariant parse_cell_variant(std::string_view s);

struct GruCellVars {
  Var w_r, w_z, w_h;
  Var u_r, u_z, u_h;
  Var b_r, b_z, b_h;

  bool has_input() const { return w_z.valid(); }
  static GruCellVars bind(const diff::BoundParams& params,
                          std::string_view prefix);
};

struct MinimalCellVars {
  Var w_f, w_h;
  Var u_f, u_h;
  Var b_f, b_h;

  bool has_input() const { return w_f.valid(); }
  static MinimalCellVars bind(const diff::BoundParams& params,
                              std::string_view prefix);
};

struct OdeCellVars {
  CellVariant variant = CellVariant::full;
  GruCellVars full;
  MinimalCellVars minimal;

  static OdeCellVars bind(const diff::BoundParams& params,
                          std::string_view prefix, CellVariant variant);
};

/// Registers `<prefix>w_*` (H x input_dim, omitted when input_dim == 0),
/// `<prefix>u_*` (H x H) and `<prefix>b_*` (H x 1).
void add_gru_cell(diff::ParamLayout& layout, const std::string& prefix,
                  diff::Index hidden, diff::Index input_dim);
void add_minimal_cell(diff::ParamLayout& layout, const std::string& prefix,
                      diff::Index hidden, diff::Index input_dim);
void add_ode_cell(diff::ParamLayout& layout, const std::string& prefix,
                  CellVariant variant, diff::Index hidden,
                  diff::Index input_dim);

struct Gates {
  Var r;
  Var z;
  Var g;
};

/// Reset gate, update gate and candidate of the full cell.
Gates gru_gates(const GruCellVars& p, Var h, const std::optional<Var>& x);

/// dh/dt of the selected variant.
Var vector_field(const OdeCellVars& p, Var h, const std::optional<Var>& x);
Var vector_field(const GruCellVars& p, Var h, const std::optional<Var>& x);
Var vector_field(const MinimalCellVars& p, Var h,
                 const std::optional<Var>& x);

/// h' = z * h + (1 - z) * g.
Var discrete_gru_step(const GruCellVars& p, Var h, const std::optional<Var>& x);
/// h' = f * h + (1 - f) * sigmoid(W_h x + U_h (h * f) + b_h).
Var discrete_minimal_step(const MinimalCellVars& p, Var h,
                          const std::optional<Var>& x);
Var discrete_step(const OdeCellVars& p, Var h, const std::optional<Var>& x);

/// Number of bins of width `bin_width` needed to cover [t0, t1].
std::size_t bin_count(double t0, double t1, double bin_width);

/// Applies the autonomous discrete step bin_count(t0, t1, bin_width) times.
Var discretized_propagate(const OdeCellVars& p, Var h, double t0, double t1,
                          double bin_width);

}  // namespace gob::gruode
