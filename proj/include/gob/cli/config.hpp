// SPDX-License-Identifier: Apache-2.0
//
// Run configuration shared by the command-line tools. Values come from an
// optional key=value file and are then overridden by flags; both go through
// set(), which rejects unknown keys and ill-typed values.
#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gob/sde/generators.hpp"
#include "gob/trainer/model.hpp"
#include "gob/trainer/train.hpp"

namespace gob::cli {

struct KeyInfo {
  std::string name;
  std::string help;
};

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;

  // Generation.
  sde::Setting setting = sde::Setting::random_r;
  std::size_t n = 0;  // 0 = setting default
  std::size_t first_id = 0;

  // Paths.
  std::string data;
  std::string val_data;
  std::string out;
  std::string checkpoint;
  std::string history;

  // Model.
  trainer::ModelSpec model;

  // Training and solver.
  trainer::TrainConfig train;
  /// Validation share carved out of `data` when no val_data is given.
  double val_fraction = 0.2;

  // Evaluation and forecasting.
  double t_split = 4.0;
  double t_cond = 4.0;
  double t_end = 10.0;
  double query_step = 0.1;
  std::string series_id;
  double target_error = 1e-3;

  /// Keys assigned through set() so far.
  std::set<std::string, std::less<>> explicit_keys;

  /// Keys accepted by set(), in documentation order.
  static const std::vector<KeyInfo>& keys();

  /// Throws ConfigError for unknown keys or values that do not parse.
  void set(std::string_view key, std::string_view value);
  void load_file(const std::filesystem::path& path);
  /// Value of `key` as it would be written to a config file.
  std::string get(std::string_view key) const;
  bool is_set(std::string_view key) const { return explicit_keys.count(key) > 0; }

  /// Training configuration with seed and threads applied.
  trainer::TrainConfig train_config() const;
};

/// Key name as a flag: `learning_rate` -> `--learning-rate`.
std::string flag_name(std::string_view key);

}  // namespace gob::cli
