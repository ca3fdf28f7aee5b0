// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gob/diff/tape.hpp"

namespace gob::diff {

struct ParamEntry {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index offset = 0;

  Index size() const { return rows * cols; }
};

/// Ordered set of named tensors packed row-major into one flat vector.
class ParamLayout {
 public:
  std::size_t add(std::string name, Index rows, Index cols);

  const std::vector<ParamEntry>& entries() const { return entries_; }
  Index size() const { return size_; }
  std::optional<std::size_t> find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name).has_value(); }
  const ParamEntry& at(std::string_view name) const;

  Eigen::Map<Tensor2> view(Eigen::VectorXd& flat, std::string_view name) const;
  Eigen::Map<const Tensor2> view(const Eigen::VectorXd& flat,
                                 std::string_view name) const;

  bool operator==(const ParamLayout& other) const;

 private:
  std::vector<ParamEntry> entries_;
  Index size_ = 0;
};

/// Leaves for every layout entry, in layout order.
class BoundParams {
 public:
  BoundParams() = default;
  BoundParams(Tape& tape, const ParamLayout& layout,
              const Eigen::VectorXd& flat);

  const ParamLayout& layout() const { return *layout_; }
  std::span<const Var> leaves() const { return leaves_; }
  /// Leaf by name; throws if the layout has no such entry.
  Var operator[](std::string_view name) const;
  /// Leaf by name, or an invalid Var when absent.
  Var get(std::string_view name) const;

  /// Gradient of every leaf after tape.backward(), packed like the layout.
  Eigen::VectorXd gradient() const;
  /// Adds the packed gradient into `out`.
  void accumulate_gradient(Eigen::VectorXd& out, double scale = 1.0) const;

 private:
  const ParamLayout* layout_ = nullptr;
  Tape* tape_ = nullptr;
  std::vector<Var> leaves_;
};

/// Fan-in initialization of every entry whose name starts with `prefix`:
/// entries whose remaining name starts with 'b' are zeroed, matrices are drawn
/// from Uniform(-a, a) with a = 1/sqrt(columns).
void init_fan_in(Eigen::VectorXd& flat, const ParamLayout& layout,
                 std::string_view prefix, std::mt19937_64& rng);

}  // namespace gob::diff
