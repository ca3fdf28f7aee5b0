// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "gob/error.hpp"
#include "gob/grubayes/jump.hpp"
#include "helpers.hpp"

using namespace gob;
using namespace gob::diff;
using namespace gob::grubayes;

namespace {

struct Net {
  ParamLayout layout;
  Eigen::VectorXd theta;
  Index hidden, dims;
  JumpVariant variant;
};

Net random_net(JumpVariant v, Index hidden, Index dims, std::mt19937_64& rng,
               double scale = 1.0) {
  Net n{{}, {}, hidden, dims, v};
  add_obs_model(n.layout, "obs_", hidden, dims);
  add_jump(n.layout, "jump_", v, hidden, dims);
  n.theta = gob::test::uniform_vec(n.layout.size(), rng, -scale, scale);
  return n;
}

Tensor2 jump_value(const Net& n, const Tensor2& y, const Tensor2& mask, const Tensor2& h) {
  Tape t;
  BoundParams p(t, n.layout, n.theta);
  const auto jump = JumpVars::bind(p, "jump_", n.variant);
  const auto obs = ObsModelVars::bind(p, "obs_");
  return bayes_jump(jump, obs, y, mask, t.constant(h)).value();
}

Eigen::VectorXd relu_layer(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                           const Eigen::VectorXd& x, bool relu) {
  Eigen::VectorXd out(w.rows());
  for (Index i = 0; i < w.rows(); ++i) {
    double a = b[i];
    for (Index j = 0; j < w.cols(); ++j) a += w(i, j) * x[j];
    out[i] = relu ? std::max(a, 0.0) : a;
  }
  return out;
}

// Scalar oracles built directly from the parameter blocks.
Eigen::VectorXd obs_oracle(const Net& n, const Eigen::VectorXd& h) {
  auto m = [&](const char* k) -> Eigen::MatrixXd {
    return n.layout.view(n.theta, std::string("obs_") + k);
  };
  return relu_layer(m("w2"), m("b2"), relu_layer(m("w1"), m("b1"), h, true), false);
}

Eigen::VectorXd prep_oracle(const Net& n, const Eigen::VectorXd& y, const Eigen::VectorXd& mask,
                            const Eigen::VectorXd& h) {
  const Eigen::VectorXd out = obs_oracle(n, h);
  const Eigen::MatrixXd w = n.layout.view(n.theta, "jump_prep_w");
  const Eigen::MatrixXd b = n.layout.view(n.theta, "jump_prep_b");
  Eigen::VectorXd prep = Eigen::VectorXd::Zero(n.dims * kPrepSize);
  for (Index d = 0; d < n.dims; ++d) {
    if (mask[d] == 0.0) continue;
    const double mu = out[d], lv = out[n.dims + d];
    const Eigen::Vector4d q(mu, lv, y[d], (y[d] - mu) / std::exp(0.5 * lv));
    prep.segment(d * kPrepSize, kPrepSize) =
        relu_layer(w.middleRows(d * kPrepSize, kPrepSize), b.middleRows(d * kPrepSize, kPrepSize),
                   q, true);
  }
  return prep;
}

}  // namespace

TEST_CASE("observation model with zero weights predicts unit Gaussians") {
  for (Index dims : {1, 2, 5}) {
    ParamLayout layout;
    add_obs_model(layout, "obs_", 6, dims);
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(layout.size());
    Tape t;
    BoundParams p(t, layout, theta);
    const auto obs = ObsModelVars::bind(p, "obs_");
    CHECK(obs.dims() == dims);
    const auto d = f_obs(obs, t.constant(6, 3, 0.3));
    CHECK(d.mu.rows() == dims);
    CHECK(d.logvar.rows() == dims);
    CHECK(d.mu.cols() == 3);
    CHECK(d.mu.value().isZero(0.0));
    CHECK(d.logvar.value().isZero(0.0));
  }
}

TEST_CASE("observation model matches its scalar oracle") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Net n = random_net(JumpVariant::joint, 7, 3, rng);
    const Eigen::VectorXd h = gob::test::uniform_vec(7, rng);
    Tape t;
    BoundParams p(t, n.layout, n.theta);
    const auto d = f_obs(ObsModelVars::bind(p, "obs_"), t.constant(Tensor2(h)));
    const Eigen::VectorXd ref = obs_oracle(n, h);
    CHECK((d.mu.value().col(0) - ref.head(3)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((d.logvar.value().col(0) - ref.tail(3)).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("preprocessing masks, zeroes the error term and matches the oracle") {
  std::mt19937_64 rng(32);
  const Net n = random_net(JumpVariant::joint, 5, 2, rng);
  Tape t;
  BoundParams p(t, n.layout, n.theta);
  const auto obs = ObsModelVars::bind(p, "obs_");
  const auto prep = PrepVars::bind(p, "jump_prep_", kPrepSize);
  CHECK(prep.dims() == 2);
  const Eigen::VectorXd h = gob::test::uniform_vec(5, rng);
  Var hv = t.constant(Tensor2(h));

  const Tensor2 none = Tensor2::Zero(2, 1);
  CHECK(f_prep(prep, Tensor2::Constant(2, 1, 0.4), none, hv, obs).value().isZero(0.0));

  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd y = gob::test::uniform_vec(2, rng);
    Eigen::VectorXd m(2);
    m << 0.0, 1.0;
    const Eigen::VectorXd got = f_prep(prep, Tensor2(y), Tensor2(m), hv, obs).value().col(0);
    const Eigen::VectorXd ref = prep_oracle(n, y, m, h);
    CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(got.head(kPrepSize).isZero(0.0));
  }

  // y equal to the mean: the fourth input column carries no weight.
  const auto d = f_obs(obs, hv);
  const Tensor2 y = d.mu.value();
  const Tensor2 m = Tensor2::Ones(2, 1);
  const Tensor2 a = f_prep(prep, y, m, d).value();
  ParamLayout l2 = n.layout;
  Eigen::VectorXd theta2 = n.theta;
  l2.view(theta2, "jump_prep_w").col(3).setConstant(37.0);
  Tape t2;
  BoundParams p2(t2, l2, theta2);
  const auto d2 = f_obs(ObsModelVars::bind(p2, "obs_"), t2.constant(Tensor2(h)));
  CHECK((f_prep(PrepVars::bind(p2, "jump_prep_", kPrepSize), y, m, d2).value() - a)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("every jump variant keeps the state inside the unit box") {
  std::mt19937_64 rng(33);
  for (JumpVariant v : {JumpVariant::joint, JumpVariant::seq, JumpVariant::mlp}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const Net n = random_net(v, 4, 2, rng, 2.0);
      const Tensor2 h = gob::test::uniform(4, 1, rng);
      const Tensor2 y = gob::test::uniform(2, 1, rng, -3.0, 3.0);
      Tensor2 m = Tensor2::Ones(2, 1);
      if (trial % 3 == 1) m(0, 0) = 0.0;
      if (trial % 3 == 2) m(1, 0) = 0.0;
      CHECK((jump_value(n, y, m, h).array().abs() <= 1.0).all());
    }
  }
}

TEST_CASE("sequential jump with one observed dimension equals the joint jump") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    Net n = random_net(JumpVariant::joint, 6, 3, rng);
    const Tensor2 h = gob::test::uniform(6, 1, rng);
    const Tensor2 y = gob::test::uniform(3, 1, rng);
    Tensor2 m = Tensor2::Zero(3, 1);
    m(trial % 3, 0) = 1.0;
    const Tensor2 joint = jump_value(n, y, m, h);
    n.variant = JumpVariant::seq;
    CHECK((jump_value(n, y, m, h) - joint).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("sequential jump absorbs dimensions one at a time") {
  std::mt19937_64 rng(35);
  Net n = random_net(JumpVariant::seq, 5, 2, rng);
  const Tensor2 h = gob::test::uniform(5, 1, rng);
  const Tensor2 y = gob::test::uniform(2, 1, rng);
  Tensor2 m0 = Tensor2::Zero(2, 1), m1 = Tensor2::Zero(2, 1);
  m0(0, 0) = 1.0;
  m1(1, 0) = 1.0;
  n.variant = JumpVariant::joint;
  const Tensor2 two_steps = jump_value(n, y, m1, jump_value(n, y, m0, h));
  n.variant = JumpVariant::seq;
  CHECK((jump_value(n, y, Tensor2::Ones(2, 1), h) - two_steps).cwiseAbs().maxCoeff() < 1e-15);
  // A batch column that observes only dimension 1 is unaffected by dimension 0.
  Tensor2 hb(5, 2), yb(2, 2), mb(2, 2);
  hb << h, h;
  yb << y, y;
  mb << 1, 0, 1, 1;
  const Tensor2 batch = jump_value(n, yb, mb, hb);
  CHECK((batch.col(0) - two_steps).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((batch.col(1) - jump_value(n, y, m1, h)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("saturated update gate ignores the observation") {
  std::mt19937_64 rng(36);
  for (JumpVariant v : {JumpVariant::joint, JumpVariant::seq}) {
    Net n = random_net(v, 4, 2, rng);
    n.layout.view(n.theta, "jump_gru_b_z").setConstant(100.0);
    const Tensor2 h = gob::test::uniform(4, 1, rng);
    const Tensor2 y = gob::test::uniform(2, 1, rng);
    CHECK((jump_value(n, y, Tensor2::Ones(2, 1), h) - h).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("unobserved entries of y do not change the jump") {
  std::mt19937_64 rng(37);
  for (JumpVariant v : {JumpVariant::joint, JumpVariant::seq, JumpVariant::mlp}) {
    const Net n = random_net(v, 4, 3, rng);
    const Tensor2 h = gob::test::uniform(4, 2, rng);
    Tensor2 y = gob::test::uniform(3, 2, rng);
    Tensor2 m(3, 2);
    m << 1, 0, 0, 1, 1, 1;
    const Tensor2 base = jump_value(n, y, m, h);
    y(1, 0) = 1e6;
    y(0, 1) = -42.0;
    CHECK(jump_value(n, y, m, h) == base);
  }
}

TEST_CASE("an all-zero or malformed mask is rejected") {
  std::mt19937_64 rng(38);
  const Net n = random_net(JumpVariant::joint, 4, 2, rng);
  const Tensor2 h = gob::test::uniform(4, 2, rng);
  Tensor2 m(2, 2);
  m << 1, 0, 1, 0;
  CHECK_THROWS_AS(jump_value(n, Tensor2::Zero(2, 2), m, h), DataError);
  m << 1, 0.5, 1, 1;
  CHECK_THROWS_AS(jump_value(n, Tensor2::Zero(2, 2), m, h), DataError);
  CHECK_THROWS(jump_value(n, Tensor2::Zero(3, 2), Tensor2::Ones(3, 2), h));
  CHECK_THROWS_AS(parse_jump_variant("lstm"), ConfigError);
}

TEST_CASE("joint jump can reach an arbitrary target") {
  std::mt19937_64 rng(39);
  Net n = random_net(JumpVariant::joint, 4, 2, rng, 0.5);
  const Tensor2 h = gob::test::uniform(4, 1, rng);
  const Tensor2 y = gob::test::uniform(2, 1, rng);
  const Tensor2 target = gob::test::uniform(4, 1, rng, -0.9, 0.9);
  const Tensor2 m = Tensor2::Ones(2, 1);
  const Objective f = [&](Tape& t, const BoundParams& p) {
    const auto jump = JumpVars::bind(p, "jump_", JumpVariant::joint);
    const auto obs = ObsModelVars::bind(p, "obs_");
    Var hp = bayes_jump(jump, obs, y, m, t.constant(h));
    return sum(square(sub(hp, t.constant(target))));
  };
  // Adam, plain.
  Eigen::VectorXd mo = Eigen::VectorXd::Zero(n.theta.size()), v = mo;
  double loss = 1.0;
  for (int it = 1; it <= 5000 && loss > 1e-8; ++it) {
    const auto vg = value_and_grad(f, n.layout, n.theta);
    loss = vg.value;
    mo = 0.9 * mo + 0.1 * vg.grad;
    v = 0.999 * v + 0.001 * vg.grad.cwiseAbs2();
    const Eigen::VectorXd mh = mo / (1.0 - std::pow(0.9, it));
    const Eigen::VectorXd vh = v / (1.0 - std::pow(0.999, it));
    n.theta.array() -= 0.01 * mh.array() / (vh.array().sqrt() + 1e-8);
  }
  const Tensor2 reached = jump_value(n, y, m, h);
  CHECK((reached - target).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("jump gradients pass the finite-difference check for every variant") {
  std::mt19937_64 rng(40);
  for (JumpVariant v : {JumpVariant::joint, JumpVariant::seq, JumpVariant::mlp}) {
    const Net n = random_net(v, 4, 2, rng, 0.7);
    const Tensor2 h = gob::test::uniform(4, 3, rng);
    const Tensor2 y = gob::test::uniform(2, 3, rng);
    Tensor2 m(2, 3);
    m << 1, 0, 1, 1, 1, 0;
    const Objective f = [&](Tape& t, const BoundParams& p) {
      const auto jump = JumpVars::bind(p, "jump_", v);
      const auto obs = ObsModelVars::bind(p, "obs_");
      Var hp = bayes_jump(jump, obs, y, m, t.constant(h));
      const auto d = f_obs(obs, hp);
      return sum(mul(d.mu, d.logvar));
    };
    CHECK(gob::test::check_objective(f, n.layout, n.theta).passed);
  }
}
