// SPDX-License-Identifier: Apache-2.0
//
// Parameter set of a filtering model (ODE cell, jump, observation model,
// initial state) and its binding onto a tape.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "gob/diff/params.hpp"
#include "gob/grubayes/jump.hpp"
#include "gob/grubayes/observation.hpp"
#include "gob/gruode/cell.hpp"

namespace gob::trainer {

using diff::Index;
using diff::Var;

/// Between observations the hidden state follows the ODE or, for the
/// ablation, the autonomous discrete GRU applied once per time bin.
enum class Propagation { ode, discretized };

std::string_view to_string(Propagation p);
Propagation parse_propagation(std::string_view s);

struct ModelSpec {
  Index dims = 2;
  Index hidden = 50;
  Index prep_size = grubayes::kPrepSize;
  Index obs_hidden = grubayes::kObsHidden;
  gruode::CellVariant cell = gruode::CellVariant::full;
  grubayes::JumpVariant jump = grubayes::JumpVariant::joint;
  Propagation propagation = Propagation::ode;
  /// Bin width of discretized propagation.
  double bin_width = 0.5;

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

diff::ParamLayout model_layout(const ModelSpec& spec);

struct ModelParams {
  ModelSpec spec;
  diff::ParamLayout layout;
  Eigen::VectorXd theta;

  /// Initial hidden state (H x 1 view into theta).
  Eigen::Map<const diff::Tensor2> h0() const { return layout.view(theta, "h0"); }
  /// Clamps h0 into [-1, 1].
  void project();
};

/// Fan-in uniform weights, zero biases and h0 = 0.
ModelParams make_model(const ModelSpec& spec, std::uint64_t seed);

/// Every component of a model as tape variables.
struct BoundModel {
  const ModelSpec* spec = nullptr;
  diff::BoundParams params;
  gruode::OdeCellVars ode;
  grubayes::JumpVars jump;
  grubayes::ObsModelVars obs;
  /// clamp(h0, -1, 1), H x 1.
  Var h0;

  BoundModel(diff::Tape& tape, const ModelParams& model);
};

}  // namespace gob::trainer
