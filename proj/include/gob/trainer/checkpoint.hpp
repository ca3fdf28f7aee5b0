// SPDX-License-Identifier: Apache-2.0
//
// Plain-text checkpoints: a versioned key/value header describing the model
// and its training configuration, followed by the flat parameter vector.
#pragma once

#include <filesystem>

#include "gob/trainer/model.hpp"
#include "gob/trainer/train.hpp"

namespace gob::trainer {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams model;
  TrainConfig train;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws Error on a missing file, a version mismatch or a malformed body.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gob::trainer
