// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <optional>

#include "gob/error.hpp"
#include "gob/gruode/cell.hpp"
#include "helpers.hpp"

using namespace gob;
using namespace gob::diff;
using namespace gob::gruode;

namespace {

struct Cell {
  ParamLayout layout;
  Eigen::VectorXd theta;
};

Cell random_cell(CellVariant variant, Index hidden, Index input, std::mt19937_64& rng,
                 double scale = 1.0) {
  Cell c;
  add_ode_cell(c.layout, "c_", variant, hidden, input);
  c.theta = gob::test::uniform_vec(c.layout.size(), rng, -scale, scale);
  return c;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Plain scalar loops over the full-cell equations.
struct ScalarGru {
  Eigen::VectorXd r, z, g, field, step;
};

ScalarGru scalar_gru(const Cell& c, const Eigen::VectorXd& h, const Eigen::VectorXd* x) {
  auto m = [&](const char* n) { return c.layout.view(c.theta, std::string("c_") + n); };
  const Index n = h.size();
  ScalarGru out;
  out.r.resize(n);
  out.z.resize(n);
  out.g.resize(n);
  for (Index i = 0; i < n; ++i) {
    double ar = m("b_r")(i, 0), az = m("b_z")(i, 0);
    for (Index j = 0; j < n; ++j) {
      ar += m("u_r")(i, j) * h[j];
      az += m("u_z")(i, j) * h[j];
    }
    if (x != nullptr) {
      for (Index j = 0; j < x->size(); ++j) {
        ar += m("w_r")(i, j) * (*x)[j];
        az += m("w_z")(i, j) * (*x)[j];
      }
    }
    out.r[i] = sig(ar);
    out.z[i] = sig(az);
  }
  for (Index i = 0; i < n; ++i) {
    double ah = m("b_h")(i, 0);
    for (Index j = 0; j < n; ++j) ah += m("u_h")(i, j) * out.r[j] * h[j];
    if (x != nullptr) {
      for (Index j = 0; j < x->size(); ++j) ah += m("w_h")(i, j) * (*x)[j];
    }
    out.g[i] = std::tanh(ah);
  }
  out.field.resize(n);
  out.step.resize(n);
  for (Index i = 0; i < n; ++i) {
    out.field[i] = (1.0 - out.z[i]) * (out.g[i] - h[i]);
    out.step[i] = out.z[i] * h[i] + (1.0 - out.z[i]) * out.g[i];
  }
  return out;
}

Eigen::VectorXd field_value(const Cell& c, CellVariant variant, const Eigen::VectorXd& h,
                            const Tensor2* x = nullptr) {
  Tape t;
  BoundParams p(t, c.layout, c.theta);
  const auto vars = OdeCellVars::bind(p, "c_", variant);
  std::optional<Var> xv;
  if (x != nullptr) xv = t.constant(*x);
  return vector_field(vars, t.constant(Tensor2(h)), xv).value().col(0);
}

}  // namespace

TEST_CASE("zero parameters give half-open gates and a zero candidate") {
  Cell c;
  add_gru_cell(c.layout, "c_", 3, 0);
  c.theta = Eigen::VectorXd::Zero(c.layout.size());
  Tape t;
  BoundParams p(t, c.layout, c.theta);
  const auto g = gru_gates(GruCellVars::bind(p, "c_"), t.constant(3, 1, 0.0), std::nullopt);
  CHECK(g.r.value() == Tensor2::Constant(3, 1, 0.5));
  CHECK(g.z.value() == Tensor2::Constant(3, 1, 0.5));
  CHECK(g.g.value() == Tensor2::Zero(3, 1));
  const Eigen::VectorXd f =
      field_value(c, CellVariant::full, Eigen::VectorXd::Constant(1, 0.4).replicate(3, 1));
  CHECK(f[0] == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("full cell matches the scalar oracle with and without input") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Cell c = random_cell(CellVariant::full, 6, 3, rng);
    const Eigen::VectorXd h = gob::test::uniform_vec(6, rng);
    const Eigen::VectorXd x = gob::test::uniform_vec(3, rng);
    const ScalarGru ref = scalar_gru(c, h, &x);
    Tape t;
    BoundParams p(t, c.layout, c.theta);
    const auto vars = GruCellVars::bind(p, "c_");
    Var hv = t.constant(Tensor2(h));
    Var xv = t.constant(Tensor2(x));
    const Gates g = gru_gates(vars, hv, xv);
    CHECK((g.r.value().col(0) - ref.r).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((g.z.value().col(0) - ref.z).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((g.g.value().col(0) - ref.g).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((vector_field(vars, hv, xv).value().col(0) - ref.field).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((discrete_gru_step(vars, hv, xv).value().col(0) - ref.step).cwiseAbs().maxCoeff() <
          1e-14);
  }
  const Cell autonomous = random_cell(CellVariant::full, 4, 0, rng);
  const Eigen::VectorXd h = gob::test::uniform_vec(4, rng);
  const ScalarGru ref = scalar_gru(autonomous, h, nullptr);
  CHECK((field_value(autonomous, CellVariant::full, h) - ref.field).cwiseAbs().maxCoeff() <
        1e-14);
}

TEST_CASE("minimal cell matches its closed form") {
  std::mt19937_64 rng(6);
  const Cell c = random_cell(CellVariant::minimal, 5, 0, rng);
  const Eigen::VectorXd h = gob::test::uniform_vec(5, rng);
  auto m = [&](const char* n) { return c.layout.view(c.theta, std::string("c_") + n); };
  Eigen::VectorXd f(5), hf(5), expect(5);
  for (Index i = 0; i < 5; ++i) {
    double a = m("b_f")(i, 0);
    for (Index j = 0; j < 5; ++j) a += m("u_f")(i, j) * h[j];
    f[i] = sig(a);
    hf[i] = h[i] * f[i];
  }
  for (Index i = 0; i < 5; ++i) {
    double a = m("b_h")(i, 0);
    for (Index j = 0; j < 5; ++j) a += m("u_h")(i, j) * hf[j];
    expect[i] = (1.0 - f[i]) * (sig(a) - h[i]);
  }
  CHECK((field_value(c, CellVariant::minimal, h) - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("saturated update gate freezes the state") {
  std::mt19937_64 rng(8);
  Cell c = random_cell(CellVariant::full, 4, 0, rng);
  c.layout.view(c.theta, "c_b_z").setConstant(100.0);
  const Eigen::VectorXd h = gob::test::uniform_vec(4, rng);
  CHECK(field_value(c, CellVariant::full, h).cwiseAbs().maxCoeff() < 1e-40);
  Tape t;
  BoundParams p(t, c.layout, c.theta);
  const auto vars = GruCellVars::bind(p, "c_");
  Var hv = t.constant(Tensor2(h));
  CHECK((gru_gates(vars, hv, std::nullopt).z.value().array() >= 1.0 - 1e-15).all());
  CHECK((discrete_gru_step(vars, hv, std::nullopt).value().col(0) - h).cwiseAbs().maxCoeff() <
        1e-40);
}

TEST_CASE("boundary push-back and outside attraction hold for both variants") {
  std::mt19937_64 rng(9);
  for (CellVariant v : {CellVariant::full, CellVariant::minimal}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const Cell c = random_cell(v, 4, 0, rng, 3.0);
      Eigen::VectorXd h = gob::test::uniform_vec(4, rng);
      const Index j = trial % 4;
      h[j] = 1.0;
      CHECK(field_value(c, v, h)[j] <= 0.0);
      h[j] = -1.0;
      CHECK(field_value(c, v, h)[j] >= 0.0);
      h[j] = 1.0 + std::uniform_real_distribution<double>(1e-3, 2.0)(rng);
      CHECK(field_value(c, v, h)[j] < 0.0);
      h[j] = -h[j];
      CHECK(field_value(c, v, h)[j] > 0.0);
    }
  }
}

TEST_CASE("field is bounded by 2 inside the unit box and by 1 + |h| outside") {
  std::mt19937_64 rng(10);
  double sup_inside = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const CellVariant v = trial % 2 == 0 ? CellVariant::full : CellVariant::minimal;
    const Cell c = random_cell(v, 5, 2, rng, 5.0);
    const Tensor2 x = gob::test::uniform(2, 1, rng, -3.0, 3.0);
    const Eigen::VectorXd h = gob::test::uniform_vec(5, rng);
    const Eigen::VectorXd f = field_value(c, v, h, &x);
    sup_inside = std::max(sup_inside, f.cwiseAbs().maxCoeff());
    const Eigen::VectorXd wide = gob::test::uniform_vec(5, rng, -3.0, 3.0);
    const Eigen::VectorXd fw = field_value(c, v, wide, &x);
    CHECK(((fw.cwiseAbs().array() - (1.0 + wide.cwiseAbs().array())) <= 1e-15).all());
  }
  CHECK(sup_inside <= 2.0);
}

TEST_CASE("one Euler step of length 1 is the discrete GRU step") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const Cell c = random_cell(CellVariant::full, 6, 0, rng, 2.0);
    Tape t;
    BoundParams p(t, c.layout, c.theta);
    const auto vars = OdeCellVars::bind(p, "c_", CellVariant::full);
    Var h = t.constant(gob::test::uniform(6, 1, rng));
    Var euler = lincomb({h, vector_field(vars, h, std::nullopt)}, {1.0, 1.0});
    Var step = discrete_step(vars, h, std::nullopt);
    CHECK((euler.value() - step.value()).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("discretized propagation applies one step per bin") {
  std::mt19937_64 rng(13);
  const Cell c = random_cell(CellVariant::full, 4, 0, rng);
  Tape t;
  BoundParams p(t, c.layout, c.theta);
  const auto vars = OdeCellVars::bind(p, "c_", CellVariant::full);
  Var h = t.constant(gob::test::uniform(4, 1, rng));
  CHECK(bin_count(0.0, 0.3, 0.1) == 3);
  CHECK(bin_count(0.0, 0.31, 0.1) == 4);
  CHECK(bin_count(2.0, 2.0, 0.5) == 0);
  const Tensor2 same = discretized_propagate(vars, h, 1.0, 1.0, 0.5).value();
  CHECK(same == h.value());
  Var manual = h;
  for (int i = 0; i < 3; ++i) manual = discrete_step(vars, manual, std::nullopt);
  const Tensor2 binned = discretized_propagate(vars, h, 0.0, 3.0, 1.0).value();
  CHECK(binned == manual.value());
  Var far = discretized_propagate(vars, h, 0.0, 200.0, 0.5);
  CHECK((far.value().array().abs() <= 1.0).all());
  CHECK_THROWS(discretized_propagate(vars, h, 1.0, 0.5, 0.5));
}

TEST_CASE("cell gradients pass the finite-difference check") {
  std::mt19937_64 rng(14);
  for (CellVariant v : {CellVariant::full, CellVariant::minimal}) {
    const Cell c = random_cell(v, 4, 2, rng);
    const Tensor2 h = gob::test::uniform(4, 3, rng);
    const Tensor2 x = gob::test::uniform(2, 3, rng);
    const Objective f = [&](Tape& t, const BoundParams& p) {
      const auto vars = OdeCellVars::bind(p, "c_", v);
      Var hv = t.constant(h);
      Var xv = t.constant(x);
      return sum(mul(vector_field(vars, hv, xv), discrete_step(vars, hv, xv)));
    };
    CHECK(gob::test::check_objective(f, c.layout, c.theta).passed);
  }
}

TEST_CASE("shape errors are reported") {
  std::mt19937_64 rng(15);
  const Cell c = random_cell(CellVariant::full, 4, 0, rng);
  Tape t;
  BoundParams p(t, c.layout, c.theta);
  const auto vars = OdeCellVars::bind(p, "c_", CellVariant::full);
  CHECK_THROWS_AS(vector_field(vars, t.constant(3, 1, 0.0), std::nullopt), ShapeError);
  CHECK_THROWS_AS(vector_field(vars, t.constant(4, 1, 0.0), t.constant(2, 1, 0.0)),
                  ShapeError);
  CHECK_THROWS_AS(parse_cell_variant("lstm"), ConfigError);
}
