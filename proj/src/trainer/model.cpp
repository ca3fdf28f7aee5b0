// SPDX-License-Identifier: Apache-2.0
#include "gob/trainer/model.hpp"

#include <random>

#include "gob/error.hpp"

namespace gob::trainer {

std::string_view to_string(Propagation p) {
  return p == Propagation::ode ? "ode" : "discretized";
}

Propagation parse_propagation(std::string_view s) {
  if (s == "ode") return Propagation::ode;
  if (s == "discretized") return Propagation::discretized;
  throw ConfigError("unknown propagation '" + std::string(s) +
                    "' (expected ode or discretized)");
}

void ModelSpec::validate() const {
  if (dims < 1) throw ConfigError("model needs at least one data dimension");
  if (hidden < 1) throw ConfigError("hidden size must be positive");
  if (prep_size < 1) throw ConfigError("prep size must be positive");
  if (obs_hidden < 1) throw ConfigError("observation hidden size must be positive");
  if (!(bin_width > 0.0)) throw ConfigError("bin width must be positive");
}

diff::ParamLayout model_layout(const ModelSpec& spec) {
  spec.validate();
  diff::ParamLayout layout;
  gruode::add_ode_cell(layout, "ode_", spec.cell, spec.hidden, 0);
  grubayes::add_jump(layout, "jump_", spec.jump, spec.hidden, spec.dims,
                     spec.prep_size);
  grubayes::add_obs_model(layout, "obs_", spec.hidden, spec.dims,
                          spec.obs_hidden);
  layout.add("h0", spec.hidden, 1);
  return layout;
}

void ModelParams::project() {
  auto h = layout.view(theta, "h0");
  h = h.cwiseMax(-1.0).cwiseMin(1.0);
}

ModelParams make_model(const ModelSpec& spec, std::uint64_t seed) {
  ModelParams m;
  m.spec = spec;
  m.layout = model_layout(spec);
  m.theta = Eigen::VectorXd::Zero(m.layout.size());
  std::mt19937_64 rng(seed);
  diff::init_fan_in(m.theta, m.layout, "ode_", rng);
  diff::init_fan_in(m.theta, m.layout, "jump_prep_", rng);
  diff::init_fan_in(m.theta, m.layout, "jump_gru_", rng);
  diff::init_fan_in(m.theta, m.layout, "jump_mlp_", rng);
  diff::init_fan_in(m.theta, m.layout, "obs_", rng);
  return m;
}

BoundModel::BoundModel(diff::Tape& tape, const ModelParams& model)
    : spec(&model.spec), params(tape, model.layout, model.theta) {
  if (model.theta.size() != model.layout.size()) {
    throw ShapeError("parameter vector does not match the model layout");
  }
  ode = gruode::OdeCellVars::bind(params, "ode_", model.spec.cell);
  jump = grubayes::JumpVars::bind(params, "jump_", model.spec.jump,
                                  model.spec.prep_size);
  obs = grubayes::ObsModelVars::bind(params, "obs_");
  h0 = diff::clamp(params["h0"], -1.0, 1.0);
}

}  // namespace gob::trainer
