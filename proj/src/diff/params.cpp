// SPDX-License-Identifier: Apache-2.0
#include "gob/diff/params.hpp"

#include <cmath>

#include "gob/error.hpp"

namespace gob::diff {

std::size_t ParamLayout::add(std::string name, Index rows, Index cols) {
  if (rows < 0 || cols < 0) throw ShapeError("negative parameter shape");
  if (contains(name)) throw Error("duplicate parameter '" + name + "'");
  entries_.push_back(ParamEntry{std::move(name), rows, cols, size_});
  size_ += rows * cols;
  return entries_.size() - 1;
}

std::optional<std::size_t> ParamLayout::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return std::nullopt;
}

const ParamEntry& ParamLayout::at(std::string_view name) const {
  auto i = find(name);
  if (!i) throw Error("unknown parameter '" + std::string(name) + "'");
  return entries_[*i];
}

Eigen::Map<Tensor2> ParamLayout::view(Eigen::VectorXd& flat,
                                      std::string_view name) const {
  const ParamEntry& e = at(name);
  if (flat.size() != size_) throw ShapeError("flat parameter size mismatch");
  return Eigen::Map<Tensor2>(flat.data() + e.offset, e.rows, e.cols);
}

Eigen::Map<const Tensor2> ParamLayout::view(const Eigen::VectorXd& flat,
                                            std::string_view name) const {
  const ParamEntry& e = at(name);
  if (flat.size() != size_) throw ShapeError("flat parameter size mismatch");
  return Eigen::Map<const Tensor2>(flat.data() + e.offset, e.rows, e.cols);
}

bool ParamLayout::operator==(const ParamLayout& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

BoundParams::BoundParams(Tape& tape, const ParamLayout& layout,
                         const Eigen::VectorXd& flat)
    : layout_(&layout), tape_(&tape) {
  if (flat.size() != layout.size()) {
    throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) +
                     " entries, layout needs " + std::to_string(layout.size()));
  }
  leaves_.reserve(layout.entries().size());
  for (const ParamEntry& e : layout.entries()) {
    leaves_.push_back(tape.leaf(
        Eigen::Map<const Tensor2>(flat.data() + e.offset, e.rows, e.cols)));
  }
}

Var BoundParams::operator[](std::string_view name) const {
  auto i = layout_->find(name);
  if (!i) throw Error("unknown parameter '" + std::string(name) + "'");
  return leaves_[*i];
}

Var BoundParams::get(std::string_view name) const {
  auto i = layout_->find(name);
  return i ? leaves_[*i] : Var{};
}

Eigen::VectorXd BoundParams::gradient() const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(layout_->size());
  accumulate_gradient(g);
  return g;
}

void BoundParams::accumulate_gradient(Eigen::VectorXd& out,
                                      double scale) const {
  if (out.size() != layout_->size()) throw ShapeError("gradient size mismatch");
  const auto& entries = layout_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!tape_->has_grad(leaves_[i])) continue;
    const ParamEntry& e = entries[i];
    Eigen::Map<Tensor2>(out.data() + e.offset, e.rows, e.cols) +=
        scale * tape_->grad(leaves_[i]);
  }
}

void init_fan_in(Eigen::VectorXd& flat, const ParamLayout& layout,
                 std::string_view prefix, std::mt19937_64& rng) {
  if (flat.size() != layout.size()) throw ShapeError("flat parameter size mismatch");
  for (const ParamEntry& e : layout.entries()) {
    std::string_view name = e.name;
    if (!name.starts_with(prefix)) continue;
    name.remove_prefix(prefix.size());
    auto block = flat.segment(e.offset, e.size());
    if (name.starts_with('b') || e.cols == 0) {
      block.setZero();
      continue;
    }
    const double a = 1.0 / std::sqrt(static_cast<double>(e.cols));
    std::uniform_real_distribution<double> dist(-a, a);
    for (Index i = 0; i < block.size(); ++i) block[i] = dist(rng);
  }
}

}  // namespace gob::diff
