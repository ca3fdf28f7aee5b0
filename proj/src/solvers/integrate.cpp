// SPDX-License-Identifier: Apache-2.0
#include "gob/solvers/integrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "gob/error.hpp"

namespace gob::solvers {

using diff::Tensor2;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::euler: return "euler";
    case Method::midpoint: return "midpoint";
    case Method::dopri: return "dopri";
  }
  return "unknown";
}

Method parse_method(std::string_view s) {
  if (s == "euler") return Method::euler;
  if (s == "midpoint") return Method::midpoint;
  if (s == "dopri") return Method::dopri;
  throw ConfigError("unknown solver '" + std::string(s) + "'");
}

void SolverConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("solver dt must be positive");
  if (!(rtol > 0.0) || !(atol > 0.0)) {
    throw ConfigError("solver tolerances must be positive");
  }
  if (max_steps < 1) throw ConfigError("solver max_steps must be at least 1");
  if (!(initial_step_fraction > 0.0) || initial_step_fraction > 1.0) {
    throw ConfigError("initial_step_fraction must lie in (0, 1]");
  }
}

std::size_t fixed_step_count(double t0, double t1, double dt) {
  const double ratio = (t1 - t0) / dt;
  return static_cast<std::size_t>(
      std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
}

namespace {

void check_interval(double t0, double t1) {
  if (!std::isfinite(t0) || !std::isfinite(t1)) {
    throw SolverError("non-finite integration bounds");
  }
  if (t1 < t0) {
    throw SolverError("integration end " + std::to_string(t1) +
                      " precedes start " + std::to_string(t0));
  }
}

Integration fixed_step(const VectorField& field, Var h, double t0, double t1,
                       const SolverConfig& cfg, const StepObserver& observer) {
  Integration out;
  const std::size_t n = fixed_step_count(t0, t1, cfg.dt);
  if (n > cfg.max_steps) {
    throw SolverError("fixed-step integration needs " + std::to_string(n) +
                      " steps, max_steps is " + std::to_string(cfg.max_steps));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) * cfg.dt;
    const double step = (i + 1 == n) ? t1 - t : cfg.dt;
    if (cfg.method == Method::euler) {
      Var k = field(t, h);
      h = diff::lincomb({h, k}, {1.0, step});
      out.field_evals += 1;
    } else {
      Var k1 = field(t, h);
      Var mid = diff::lincomb({h, k1}, {1.0, 0.5 * step});
      Var k2 = field(t + 0.5 * step, mid);
      h = diff::lincomb({h, k2}, {1.0, step});
      out.field_evals += 2;
    }
    ++out.steps;
    if (observer) observer(i + 1 == n ? t1 : t + step, h.value());
  }
  out.state = h;
  return out;
}

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 7> kC = {0.0,       1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0,
                                      8.0 / 9.0, 1.0,       1.0};
constexpr double kA21 = 1.0 / 5.0;
constexpr std::array<double, 2> kA3 = {3.0 / 40.0, 9.0 / 40.0};
constexpr std::array<double, 3> kA4 = {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0};
constexpr std::array<double, 4> kA5 = {19372.0 / 6561.0, -25360.0 / 2187.0,
                                       64448.0 / 6561.0, -212.0 / 729.0};
constexpr std::array<double, 5> kA6 = {9017.0 / 3168.0, -355.0 / 33.0,
                                       46732.0 / 5247.0, 49.0 / 176.0,
                                       -5103.0 / 18656.0};
// Fifth-order weights (row 7 of the tableau; k2 weight is zero).
constexpr std::array<double, 6> kB = {35.0 / 384.0,     0.0,
                                      500.0 / 1113.0,   125.0 / 192.0,
                                      -2187.0 / 6784.0, 11.0 / 84.0};
// Difference between fifth- and fourth-order weights, k1..k7.
constexpr std::array<double, 7> kE = {
    35.0 / 384.0 - 5179.0 / 57600.0,   0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0, 125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0, 11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0};

Var stage(Var h, std::span<const Var> ks, std::span<const double> a,
          double step) {
  std::array<Var, 7> terms;
  std::array<double, 7> coeffs;
  terms[0] = h;
  coeffs[0] = 1.0;
  std::size_t n = 1;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] == 0.0) continue;
    terms[n] = ks[j];
    coeffs[n] = step * a[j];
    ++n;
  }
  return diff::lincomb(std::span<const Var>(terms.data(), n),
                       std::span<const double>(coeffs.data(), n));
}

Integration dopri(const VectorField& field, Var h, double t0, double t1,
                  const SolverConfig& cfg, const StepObserver& observer) {
  Integration out;
  out.state = h;
  if (t1 == t0) return out;
  diff::Tape& tape = h.tape();
  double t = t0;
  double step = (t1 - t0) * cfg.initial_step_fraction;
  const double min_step = 1e-14 * std::max(1.0, std::abs(t1));

  std::array<Var, 7> k;
  k[0] = field(t, h);
  out.field_evals += 1;

  while (t < t1) {
    if (out.steps >= cfg.max_steps) {
      throw SolverError("adaptive integration exceeded max_steps=" +
                        std::to_string(cfg.max_steps) + " at t=" +
                        std::to_string(t));
    }
    if (out.steps + out.rejected >= 100 * cfg.max_steps) {
      throw SolverError("adaptive integration rejected too many steps");
    }
    bool last = false;
    if (t + step >= t1 || t1 - (t + step) < min_step) {
      step = t1 - t;
      last = true;
    }
    if (step < min_step) throw SolverError("adaptive step size underflow");

    const std::size_t mark = tape.size();
    Var y = stage(h, k, std::span<const double>(&kA21, 1), step);
    k[1] = field(t + kC[1] * step, y);
    y = stage(h, k, kA3, step);
    k[2] = field(t + kC[2] * step, y);
    y = stage(h, k, kA4, step);
    k[3] = field(t + kC[3] * step, y);
    y = stage(h, k, kA5, step);
    k[4] = field(t + kC[4] * step, y);
    y = stage(h, k, kA6, step);
    k[5] = field(t + kC[5] * step, y);
    Var h_new = stage(h, k, kB, step);
    k[6] = field(t + step, h_new);
    out.field_evals += 6;

    Tensor2 err = kE[0] * k[0].value();
    for (std::size_t j = 2; j < 7; ++j) err += kE[j] * k[j].value();
    err *= step;
    const Tensor2 scale =
        (cfg.atol +
         cfg.rtol * h.value().cwiseAbs().cwiseMax(h_new.value().cwiseAbs()).array())
            .matrix();
    const double norm = std::sqrt(err.cwiseQuotient(scale).squaredNorm() /
                                  static_cast<double>(err.size()));

    if (norm <= 1.0) {
      t = last ? t1 : t + step;
      h = h_new;
      k[0] = k[6];
      ++out.steps;
      if (observer) observer(t, h.value());
    } else {
      tape.truncate(mark);
      ++out.rejected;
    }
    const double factor =
        norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
    step *= factor;
  }
  out.state = h;
  return out;
}

}  // namespace

Integration integrate(const VectorField& field, Var h0, double t0, double t1,
                      const SolverConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  check_interval(t0, t1);
  if (!h0.value().allFinite()) throw SolverError("non-finite initial state");
  if (cfg.method == Method::dopri) return dopri(field, h0, t0, t1, cfg, observer);
  return fixed_step(field, h0, t0, t1, cfg, observer);
}

}  // namespace gob::solvers
