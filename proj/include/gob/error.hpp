// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gob {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A primitive produced a NaN or an infinity.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& primitive, std::size_t node)
      : Error("non-finite value produced by primitive '" + primitive +
              "' (tape node " + std::to_string(node) + ")"),
        primitive_(primitive),
        node_(node) {}

  const std::string& primitive() const noexcept { return primitive_; }
  std::size_t node() const noexcept { return node_; }

 private:
  std::string primitive_;
  std::size_t node_;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gob
