// SPDX-License-Identifier: Apache-2.0
//
// Tensor-level reverse-mode differentiation.
//
// A Tape records every primitive applied during a forward pass. Values are
// dense row-major matrices; a column usually holds one series, so a batch of
// hidden states is an H x B matrix. backward() replays adjoints in exact
// reverse recording order and accumulates additively at fan-out.
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace gob::diff {

using Tensor2 =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

enum class Op : std::uint8_t {
  leaf,
  constant,
  matmul,
  add,
  sub,
  mul,
  div,
  add_bias,
  affine,
  lincomb,
  sigmoid,
  tanh,
  relu,
  exp,
  log,
  square,
  sum,
  masked_sum,
  mul_const,
  slice_rows,
  concat_rows,
  gather_cols,
  scatter_cols,
  clamp,
};

std::string_view op_name(Op op);

class Tape;
struct TapeAccess;

/// Handle to a value recorded on a tape. Cheap to copy; valid until the
/// tape is cleared or truncated below its index.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::uint32_t index() const { return index_; }

  const Tensor2& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 variable.
  double scalar() const;

 private:
  friend class Tape;
  friend struct TapeAccess;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(const Eigen::Ref<const Tensor2>& value);
  /// Input that receives no gradient.
  Var constant(const Eigen::Ref<const Tensor2>& value);
  Var constant(Index rows, Index cols, double fill);

  std::size_t size() const { return count_; }
  /// Drops every node recorded after `mark`; storage is kept for reuse.
  void truncate(std::size_t mark);
  void clear() { truncate(0); }

  /// Seeds d(output)/d(output) = seed for a 1x1 output and replays adjoints.
  void backward(Var output, double seed = 1.0);
  /// Same with an explicit output adjoint of the output's shape.
  void backward(Var output, const Tensor2& seed);

  bool has_grad(Var v) const;
  /// Adjoint of v after backward(); zeros when no gradient reached v.
  Tensor2 grad(Var v) const;

  const Tensor2& value(Var v) const { return nodes_[v.index_].value; }

  // Implementation detail; exposed so translation-unit helpers can name it.
  struct Node {
    Op op = Op::constant;
    bool needs_grad = false;
    bool grad_live = false;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double s0 = 0.0;
    double s1 = 0.0;
    std::vector<std::uint32_t> inputs;
    std::vector<double> coeffs;
    std::vector<Index> columns;
    Tensor2 value;
    Tensor2 aux;
    Tensor2 grad;
  };

 private:
  friend struct TapeAccess;

  Node& push(Op op, bool needs_grad);
  void replay(std::uint32_t from);

  std::vector<Node> nodes_;
  std::size_t count_ = 0;
};

inline const Tensor2& Var::value() const { return tape_->value(*this); }

// ---- primitives ----------------------------------------------------------

/// Matrix product a * b.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
/// Elementwise quotient.
Var div(Var a, Var b);
/// Adds the column vector `bias` to every column of `a`.
Var add_bias(Var a, Var bias);
/// scale * a + shift, elementwise.
Var affine(Var a, double scale, double shift);
/// sum_i coeffs[i] * terms[i]; all terms share a shape.
Var lincomb(std::span<const Var> terms, std::span<const double> coeffs);
Var lincomb(std::initializer_list<Var> terms,
            std::initializer_list<double> coeffs);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
/// Sum of all entries (1x1).
Var sum(Var a);
/// Sum of mask .* a (1x1); mask is a constant of a's shape.
Var masked_sum(Var a, const Tensor2& mask);
/// Elementwise product with a constant matrix (masks, dropout).
Var mul_const(Var a, const Tensor2& factor);
Var slice_rows(Var a, Index start, Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_rows(std::initializer_list<Var> parts);
/// Columns `columns` of a, in that order.
Var gather_cols(Var a, std::span<const Index> columns);
/// Copy of base with column columns[j] replaced by column j of update.
Var scatter_cols(Var base, std::span<const Index> columns, Var update);
/// Elementwise clamp; gradient passes where lo <= a <= hi.
Var clamp(Var a, double lo, double hi);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return affine(a, -1.0, 0.0); }
/// 1 - a.
inline Var one_minus(Var a) { return affine(a, -1.0, 1.0); }

}  // namespace gob::diff
