// SPDX-License-Identifier: Apache-2.0
//
// Explicit integrators for hidden-state vector fields recorded on a tape.
// Every accepted step stays on the tape, so gradients flow through the
// solver operations; rejected adaptive trial steps are truncated away.
#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

#include "gob/diff/tape.hpp"

namespace gob::solvers {

using diff::Var;

enum class Method { euler, midpoint, dopri };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

struct SolverConfig {
  Method method = Method::euler;
  /// Fixed step for euler and midpoint.
  double dt = 0.05;
  double rtol = 1e-3;
  double atol = 1e-4;
  std::size_t max_steps = 10000;
  /// First adaptive trial step as a fraction of the interval.
  double initial_step_fraction = 0.1;

  void validate() const;
};

/// dh/dt at time t.
using VectorField = std::function<Var(double t, Var h)>;
/// Called with (t, h(t)) after every accepted step.
using StepObserver = std::function<void(double, const diff::Tensor2&)>;

struct Integration {
  Var state;
  std::size_t steps = 0;
  std::size_t field_evals = 0;
  std::size_t rejected = 0;
};

/// ceil((t1 - t0) / dt) with representation error absorbed.
std::size_t fixed_step_count(double t0, double t1, double dt);

/// Integrates from t0 to t1, landing exactly on t1. Fixed-step methods use
/// equal steps of cfg.dt with a shortened final step.
Integration integrate(const VectorField& field, Var h0, double t0, double t1,
                      const SolverConfig& cfg,
                      const StepObserver& observer = {});

}  // namespace gob::solvers
