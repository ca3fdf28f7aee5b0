// SPDX-License-Identifier: Apache-2.0
#include "gob/diff/tape.hpp"

#include <algorithm>
#include <string>

#include "gob/error.hpp"

namespace gob::diff {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::constant: return "constant";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::add_bias: return "add_bias";
    case Op::affine: return "affine";
    case Op::lincomb: return "lincomb";
    case Op::sigmoid: return "sigmoid";
    case Op::tanh: return "tanh";
    case Op::relu: return "relu";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::square: return "square";
    case Op::sum: return "sum";
    case Op::masked_sum: return "masked_sum";
    case Op::mul_const: return "mul_const";
    case Op::slice_rows: return "slice_rows";
    case Op::concat_rows: return "concat_rows";
    case Op::gather_cols: return "gather_cols";
    case Op::scatter_cols: return "scatter_cols";
    case Op::clamp: return "clamp";
  }
  return "unknown";
}

double Var::scalar() const {
  const Tensor2& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("scalar() on a " + std::to_string(v.rows()) + "x" +
                     std::to_string(v.cols()) + " value");
  }
  return v(0, 0);
}

Tape::Node& Tape::push(Op op, bool needs_grad) {
  if (count_ == nodes_.size()) nodes_.emplace_back();
  Node& n = nodes_[count_++];
  n.op = op;
  n.needs_grad = needs_grad;
  n.grad_live = false;
  n.inputs.clear();
  n.coeffs.clear();
  n.columns.clear();
  return n;
}

Var Tape::leaf(const Eigen::Ref<const Tensor2>& value) {
  Node& n = push(Op::leaf, true);
  n.value = value;
  return Var(this, static_cast<std::uint32_t>(count_ - 1));
}

Var Tape::constant(const Eigen::Ref<const Tensor2>& value) {
  Node& n = push(Op::constant, false);
  n.value = value;
  return Var(this, static_cast<std::uint32_t>(count_ - 1));
}

Var Tape::constant(Index rows, Index cols, double fill) {
  Node& n = push(Op::constant, false);
  n.value.setConstant(rows, cols, fill);
  return Var(this, static_cast<std::uint32_t>(count_ - 1));
}

void Tape::truncate(std::size_t mark) {
  if (mark > count_) throw Error("tape truncate beyond current size");
  count_ = mark;
}

bool Tape::has_grad(Var v) const {
  return v.index_ < count_ && nodes_[v.index_].grad_live;
}

Tensor2 Tape::grad(Var v) const {
  const Node& n = nodes_[v.index_];
  if (v.index_ < count_ && n.grad_live) return n.grad;
  return Tensor2::Zero(n.value.rows(), n.value.cols());
}

void Tape::backward(Var output, double seed) {
  if (output.rows() != 1 || output.cols() != 1) {
    throw ShapeError("backward(seed) needs a 1x1 output");
  }
  backward(output, Tensor2::Constant(1, 1, seed));
}

void Tape::backward(Var output, const Tensor2& seed) {
  if (output.tape_ != this || output.index_ >= count_) {
    throw Error("backward on a variable from another tape");
  }
  Node& out = nodes_[output.index_];
  if (seed.rows() != out.value.rows() || seed.cols() != out.value.cols()) {
    throw ShapeError("backward seed shape mismatch");
  }
  for (std::size_t i = 0; i < count_; ++i) nodes_[i].grad_live = false;
  out.grad = seed;
  out.grad_live = true;
  replay(output.index_);
}

struct TapeAccess {
  using Node = Tape::Node;

  static Node& node(Var v) { return v.tape_->nodes_[v.index_]; }

  static Tape& same_tape(Var a, Var b) {
    if (!a.valid() || !b.valid()) throw Error("invalid variable");
    if (a.tape_ != b.tape_) throw Error("variables live on different tapes");
    return *a.tape_;
  }

  static Tape& tape_of(Var a) {
    if (!a.valid()) throw Error("invalid variable");
    return *a.tape_;
  }

  static std::pair<Node&, Var> push(Tape& t, Op op, bool needs_grad) {
    Node& n = t.push(op, needs_grad);
    return {n, Var(&t, static_cast<std::uint32_t>(t.count_ - 1))};
  }

  static Node& at(Tape& t, std::uint32_t i) { return t.nodes_[i]; }

  static void check_finite(const Node& n, Var v) {
    if (!n.value.allFinite()) {
      throw NonFiniteError(std::string(op_name(n.op)), v.index_);
    }
  }
};

namespace {

template <class Expr>
void accumulate(Tape::Node& n, const Expr& e) {
  if (!n.grad_live) {
    n.grad = e;
    n.grad_live = true;
  } else {
    n.grad += e;
  }
}

void require_same_shape(Var a, Var b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

bool needs(Var v) { return TapeAccess::node(v).needs_grad; }

template <class F>
Var binary(Op op, Var a, Var b, F&& compute) {
  Tape& t = TapeAccess::same_tape(a, b);
  const bool ng = needs(a) || needs(b);
  auto [n, v] = TapeAccess::push(t, op, ng);
  n.a = a.index();
  n.b = b.index();
  compute(n.value, TapeAccess::at(t, n.a).value, TapeAccess::at(t, n.b).value);
  TapeAccess::check_finite(n, v);
  return v;
}

template <class F>
Var unary(Op op, Var a, F&& compute) {
  Tape& t = TapeAccess::tape_of(a);
  auto [n, v] = TapeAccess::push(t, op, needs(a));
  n.a = a.index();
  compute(n, TapeAccess::at(t, n.a).value);
  TapeAccess::check_finite(n, v);
  return v;
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()));
  }
  return binary(Op::matmul, a, b, [](Tensor2& out, const Tensor2& x,
                                     const Tensor2& y) { out.noalias() = x * y; });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  return binary(Op::add, a, b,
                [](Tensor2& out, const Tensor2& x, const Tensor2& y) {
                  out = x + y;
                });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  return binary(Op::sub, a, b,
                [](Tensor2& out, const Tensor2& x, const Tensor2& y) {
                  out = x - y;
                });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  return binary(Op::mul, a, b,
                [](Tensor2& out, const Tensor2& x, const Tensor2& y) {
                  out = x.cwiseProduct(y);
                });
}

Var div(Var a, Var b) {
  require_same_shape(a, b, "div");
  return binary(Op::div, a, b,
                [](Tensor2& out, const Tensor2& x, const Tensor2& y) {
                  out = x.cwiseQuotient(y);
                });
}

Var add_bias(Var a, Var bias) {
  if (bias.cols() != 1 || bias.rows() != a.rows()) {
    throw ShapeError("add_bias: bias must be " + std::to_string(a.rows()) +
                     "x1, got " + std::to_string(bias.rows()) + "x" +
                     std::to_string(bias.cols()));
  }
  return binary(Op::add_bias, a, bias,
                [](Tensor2& out, const Tensor2& x, const Tensor2& b) {
                  out = x;
                  out.colwise() += b.col(0);
                });
}

Var affine(Var a, double scale, double shift) {
  return unary(Op::affine, a, [&](Tape::Node& n, const Tensor2& x) {
    n.s0 = scale;
    n.s1 = shift;
    n.value = (scale * x.array() + shift).matrix();
  });
}

Var lincomb(std::span<const Var> terms, std::span<const double> coeffs) {
  if (terms.empty() || terms.size() != coeffs.size()) {
    throw ShapeError("lincomb: need matching non-empty terms and coeffs");
  }
  Tape& t = TapeAccess::tape_of(terms[0]);
  bool ng = false;
  for (const Var& v : terms) {
    TapeAccess::same_tape(terms[0], v);
    require_same_shape(terms[0], v, "lincomb");
    ng = ng || needs(v);
  }
  auto [n, v] = TapeAccess::push(t, Op::lincomb, ng);
  n.value = coeffs[0] * TapeAccess::at(t, terms[0].index()).value;
  n.inputs.push_back(terms[0].index());
  n.coeffs.push_back(coeffs[0]);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    n.value += coeffs[i] * TapeAccess::at(t, terms[i].index()).value;
    n.inputs.push_back(terms[i].index());
    n.coeffs.push_back(coeffs[i]);
  }
  TapeAccess::check_finite(n, v);
  return v;
}

Var lincomb(std::initializer_list<Var> terms,
            std::initializer_list<double> coeffs) {
  return lincomb(std::span<const Var>(terms.begin(), terms.size()),
                 std::span<const double>(coeffs.begin(), coeffs.size()));
}

Var sigmoid(Var a) {
  return unary(Op::sigmoid, a, [](Tape::Node& n, const Tensor2& x) {
    n.value = (1.0 / (1.0 + (-x.array()).exp())).matrix();
  });
}

Var tanh(Var a) {
  return unary(Op::tanh, a, [](Tape::Node& n, const Tensor2& x) {
    n.value = x.array().tanh().matrix();
  });
}

Var relu(Var a) {
  return unary(Op::relu, a, [](Tape::Node& n, const Tensor2& x) {
    n.value = x.cwiseMax(0.0);
  });
}

Var exp(Var a) {
  return unary(Op::exp, a, [](Tape::Node& n, const Tensor2& x) {
    n.value = x.array().exp().matrix();
  });
}

Var log(Var a) {
  return unary(Op::log, a, [](Tape::Node& n, const Tensor2& x) {
    n.value = x.array().log().matrix();
  });
}

Var square(Var a) {
  return unary(Op::square, a, [](Tape::Node& n, const Tensor2& x) {
    n.value = x.array().square().matrix();
  });
}

Var sum(Var a) {
  return unary(Op::sum, a, [](Tape::Node& n, const Tensor2& x) {
    n.value.setConstant(1, 1, x.sum());
  });
}

Var masked_sum(Var a, const Tensor2& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
    throw ShapeError("masked_sum: mask shape mismatch");
  }
  return unary(Op::masked_sum, a, [&](Tape::Node& n, const Tensor2& x) {
    n.aux = mask;
    n.value.setConstant(1, 1, x.cwiseProduct(mask).sum());
  });
}

Var mul_const(Var a, const Tensor2& factor) {
  if (factor.rows() != a.rows() || factor.cols() != a.cols()) {
    throw ShapeError("mul_const: factor shape mismatch");
  }
  return unary(Op::mul_const, a, [&](Tape::Node& n, const Tensor2& x) {
    n.aux = factor;
    n.value = x.cwiseProduct(factor);
  });
}

Var slice_rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " +
                     std::to_string(a.rows()));
  }
  return unary(Op::slice_rows, a, [&](Tape::Node& n, const Tensor2& x) {
    n.s0 = static_cast<double>(start);
    n.value = x.middleRows(start, count);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Tape& t = TapeAccess::tape_of(parts[0]);
  Index rows = 0;
  bool ng = false;
  for (const Var& p : parts) {
    TapeAccess::same_tape(parts[0], p);
    if (p.cols() != parts[0].cols()) {
      throw ShapeError("concat_rows: column count mismatch");
    }
    rows += p.rows();
    ng = ng || needs(p);
  }
  const Index cols = parts[0].cols();
  auto [n, v] = TapeAccess::push(t, Op::concat_rows, ng);
  n.value.resize(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    const Tensor2& pv = TapeAccess::at(t, p.index()).value;
    n.value.middleRows(at, pv.rows()) = pv;
    at += pv.rows();
    n.inputs.push_back(p.index());
  }
  TapeAccess::check_finite(n, v);
  return v;
}

Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

Var gather_cols(Var a, std::span<const Index> columns) {
  for (Index c : columns) {
    if (c < 0 || c >= a.cols()) throw ShapeError("gather_cols: bad column");
  }
  return unary(Op::gather_cols, a, [&](Tape::Node& n, const Tensor2& x) {
    n.columns.assign(columns.begin(), columns.end());
    n.value.resize(x.rows(), static_cast<Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
      n.value.col(static_cast<Index>(j)) = x.col(columns[j]);
    }
  });
}

Var scatter_cols(Var base, std::span<const Index> columns, Var update) {
  if (update.rows() != base.rows() ||
      update.cols() != static_cast<Index>(columns.size())) {
    throw ShapeError("scatter_cols: update shape mismatch");
  }
  for (Index c : columns) {
    if (c < 0 || c >= base.cols()) throw ShapeError("scatter_cols: bad column");
  }
  Tape& t = TapeAccess::same_tape(base, update);
  auto [n, v] = TapeAccess::push(t, Op::scatter_cols, needs(base) || needs(update));
  n.a = base.index();
  n.b = update.index();
  n.columns.assign(columns.begin(), columns.end());
  n.value = TapeAccess::at(t, n.a).value;
  const Tensor2& u = TapeAccess::at(t, n.b).value;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    n.value.col(columns[j]) = u.col(static_cast<Index>(j));
  }
  TapeAccess::check_finite(n, v);
  return v;
}

Var clamp(Var a, double lo, double hi) {
  return unary(Op::clamp, a, [&](Tape::Node& n, const Tensor2& x) {
    n.s0 = lo;
    n.s1 = hi;
    n.value = x.cwiseMax(lo).cwiseMin(hi);
  });
}

void Tape::replay(std::uint32_t from) {
  for (std::int64_t i = from; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.grad_live || !n.needs_grad) continue;
    const Tensor2& g = n.grad;
    auto in = [&](std::uint32_t k) -> Node& { return nodes_[k]; };
    switch (n.op) {
      case Op::leaf:
      case Op::constant:
        break;
      case Op::matmul: {
        Node& a = in(n.a);
        Node& b = in(n.b);
        if (a.needs_grad) {
          if (!a.grad_live) {
            a.grad.noalias() = g * b.value.transpose();
            a.grad_live = true;
          } else {
            a.grad.noalias() += g * b.value.transpose();
          }
        }
        if (b.needs_grad) {
          if (!b.grad_live) {
            b.grad.noalias() = a.value.transpose() * g;
            b.grad_live = true;
          } else {
            b.grad.noalias() += a.value.transpose() * g;
          }
        }
        break;
      }
      case Op::add: {
        if (in(n.a).needs_grad) accumulate(in(n.a), g);
        if (in(n.b).needs_grad) accumulate(in(n.b), g);
        break;
      }
      case Op::sub: {
        if (in(n.a).needs_grad) accumulate(in(n.a), g);
        if (in(n.b).needs_grad) accumulate(in(n.b), -g);
        break;
      }
      case Op::mul: {
        Node& a = in(n.a);
        Node& b = in(n.b);
        if (a.needs_grad) accumulate(a, g.cwiseProduct(b.value));
        if (b.needs_grad) accumulate(b, g.cwiseProduct(a.value));
        break;
      }
      case Op::div: {
        Node& a = in(n.a);
        Node& b = in(n.b);
        if (a.needs_grad) accumulate(a, g.cwiseQuotient(b.value));
        if (b.needs_grad) {
          accumulate(b, -g.cwiseProduct(n.value).cwiseQuotient(b.value));
        }
        break;
      }
      case Op::add_bias: {
        if (in(n.a).needs_grad) accumulate(in(n.a), g);
        if (in(n.b).needs_grad) accumulate(in(n.b), g.rowwise().sum());
        break;
      }
      case Op::affine:
        if (in(n.a).needs_grad) accumulate(in(n.a), n.s0 * g);
        break;
      case Op::lincomb:
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          Node& t = in(n.inputs[k]);
          if (t.needs_grad) accumulate(t, n.coeffs[k] * g);
        }
        break;
      case Op::sigmoid:
        accumulate(in(n.a), g.cwiseProduct(
                                (n.value.array() * (1.0 - n.value.array()))
                                    .matrix()));
        break;
      case Op::tanh:
        accumulate(in(n.a),
                   g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
        break;
      case Op::relu: {
        Node& a = in(n.a);
        accumulate(a, (a.value.array() > 0.0).select(g, 0.0).matrix());
        break;
      }
      case Op::exp:
        accumulate(in(n.a), g.cwiseProduct(n.value));
        break;
      case Op::log: {
        Node& a = in(n.a);
        accumulate(a, g.cwiseQuotient(a.value));
        break;
      }
      case Op::square: {
        Node& a = in(n.a);
        accumulate(a, 2.0 * g.cwiseProduct(a.value));
        break;
      }
      case Op::sum: {
        Node& a = in(n.a);
        accumulate(a, Tensor2::Constant(a.value.rows(), a.value.cols(),
                                        g(0, 0)));
        break;
      }
      case Op::masked_sum:
        accumulate(in(n.a), g(0, 0) * n.aux);
        break;
      case Op::mul_const:
        accumulate(in(n.a), g.cwiseProduct(n.aux));
        break;
      case Op::slice_rows: {
        Node& a = in(n.a);
        const auto start = static_cast<Index>(n.s0);
        if (!a.grad_live) {
          a.grad.setZero(a.value.rows(), a.value.cols());
          a.grad_live = true;
        }
        a.grad.middleRows(start, g.rows()) += g;
        break;
      }
      case Op::concat_rows: {
        Index at = 0;
        for (std::uint32_t k : n.inputs) {
          Node& p = in(k);
          const Index r = p.value.rows();
          if (p.needs_grad) accumulate(p, g.middleRows(at, r));
          at += r;
        }
        break;
      }
      case Op::gather_cols: {
        Node& a = in(n.a);
        if (!a.grad_live) {
          a.grad.setZero(a.value.rows(), a.value.cols());
          a.grad_live = true;
        }
        for (std::size_t j = 0; j < n.columns.size(); ++j) {
          a.grad.col(n.columns[j]) += g.col(static_cast<Index>(j));
        }
        break;
      }
      case Op::scatter_cols: {
        Node& base = in(n.a);
        Node& upd = in(n.b);
        if (upd.needs_grad) {
          Tensor2 gu(g.rows(), static_cast<Index>(n.columns.size()));
          for (std::size_t j = 0; j < n.columns.size(); ++j) {
            gu.col(static_cast<Index>(j)) = g.col(n.columns[j]);
          }
          accumulate(upd, gu);
        }
        if (base.needs_grad) {
          Tensor2 gb = g;
          for (Index c : n.columns) gb.col(c).setZero();
          accumulate(base, gb);
        }
        break;
      }
      case Op::clamp: {
        Node& a = in(n.a);
        accumulate(a, (a.value.array() >= n.s0 && a.value.array() <= n.s1)
                          .select(g, 0.0)
                          .matrix());
        break;
      }
    }
  }
}

}  // namespace gob::diff
