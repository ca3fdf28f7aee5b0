// SPDX-License-Identifier: Apache-2.0
#include "gob/trainer/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "gob/error.hpp"

namespace gob::trainer {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error("checkpoint: bad value for '" + key + "': " + s);
  }
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error("checkpoint: bad value for '" + key + "': " + s);
  }
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const ModelSpec& s = ckpt.model.spec;
  const TrainConfig& t = ckpt.train;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "gob-checkpoint " << kCheckpointVersion << '\n';
  out << "dims " << s.dims << '\n'
      << "hidden " << s.hidden << '\n'
      << "prep_size " << s.prep_size << '\n'
      << "obs_hidden " << s.obs_hidden << '\n'
      << "cell " << gruode::to_string(s.cell) << '\n'
      << "jump " << grubayes::to_string(s.jump) << '\n'
      << "propagation " << to_string(s.propagation) << '\n'
      << "bin_width " << num(s.bin_width) << '\n';
  out << "learning_rate " << num(t.learning_rate) << '\n'
      << "weight_decay " << num(t.weight_decay) << '\n'
      << "dropout " << num(t.dropout) << '\n'
      << "lambda " << num(t.loss.lambda) << '\n'
      << "sigma_obs " << num(t.loss.sigma_obs) << '\n'
      << "small_noise " << (t.loss.small_noise_mode ? 1 : 0) << '\n'
      << "epochs " << t.epochs << '\n'
      << "batch_size " << t.batch_size << '\n'
      << "patience " << t.patience << '\n'
      << "seed " << t.seed << '\n'
      << "solver " << solvers::to_string(t.solver.method) << '\n'
      << "dt " << num(t.solver.dt) << '\n'
      << "rtol " << num(t.solver.rtol) << '\n'
      << "atol " << num(t.solver.atol) << '\n'
      << "max_steps " << t.solver.max_steps << '\n'
      << "val_t_split " << num(t.val_t_split) << '\n'
      << "batch_timeline " << (t.batch_timeline ? 1 : 0) << '\n';
  out << "theta " << ckpt.model.theta.size() << '\n';
  for (Eigen::Index i = 0; i < ckpt.model.theta.size(); ++i) {
    out << num(ckpt.model.theta[i]) << '\n';
  }
  out << "end\n";
  if (!out) throw Error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "gob-checkpoint") {
    throw Error(path.string() + " is not a checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw Error("checkpoint version " + std::to_string(version) +
                " is not supported (expected " +
                std::to_string(kCheckpointVersion) + ")");
  }
  std::map<std::string, std::string> kv;
  std::string key, value;
  while (in >> key && key != "theta") {
    if (!(in >> value)) throw Error("checkpoint: missing value for " + key);
    kv[key] = value;
  }
  if (key != "theta") throw Error("checkpoint: missing parameter block");
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw Error("checkpoint: missing key '" + k + "'");
    return it->second;
  };

  Checkpoint c;
  ModelSpec& s = c.model.spec;
  s.dims = static_cast<Index>(to_uint("dims", get("dims")));
  s.hidden = static_cast<Index>(to_uint("hidden", get("hidden")));
  s.prep_size = static_cast<Index>(to_uint("prep_size", get("prep_size")));
  s.obs_hidden = static_cast<Index>(to_uint("obs_hidden", get("obs_hidden")));
  s.cell = gruode::parse_cell_variant(get("cell"));
  s.jump = grubayes::parse_jump_variant(get("jump"));
  s.propagation = parse_propagation(get("propagation"));
  s.bin_width = to_double("bin_width", get("bin_width"));
  TrainConfig& t = c.train;
  t.learning_rate = to_double("learning_rate", get("learning_rate"));
  t.weight_decay = to_double("weight_decay", get("weight_decay"));
  t.dropout = to_double("dropout", get("dropout"));
  t.loss.lambda = to_double("lambda", get("lambda"));
  t.loss.sigma_obs = to_double("sigma_obs", get("sigma_obs"));
  t.loss.small_noise_mode = to_uint("small_noise", get("small_noise")) != 0;
  t.epochs = to_uint("epochs", get("epochs"));
  t.batch_size = to_uint("batch_size", get("batch_size"));
  t.patience = to_uint("patience", get("patience"));
  t.seed = to_uint("seed", get("seed"));
  t.solver.method = solvers::parse_method(get("solver"));
  t.solver.dt = to_double("dt", get("dt"));
  t.solver.rtol = to_double("rtol", get("rtol"));
  t.solver.atol = to_double("atol", get("atol"));
  t.solver.max_steps = to_uint("max_steps", get("max_steps"));
  t.val_t_split = to_double("val_t_split", get("val_t_split"));
  t.batch_timeline = to_uint("batch_timeline", get("batch_timeline")) != 0;

  c.model.layout = model_layout(s);
  std::size_t n = 0;
  if (!(in >> n) || static_cast<Index>(n) != c.model.layout.size()) {
    throw Error("checkpoint: parameter count does not match the model layout");
  }
  c.model.theta.resize(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> value)) throw Error("checkpoint: truncated parameter block");
    c.model.theta[static_cast<Index>(i)] = to_double("theta", value);
  }
  if (!(in >> value) || value != "end") throw Error("checkpoint: missing end marker");
  return c;
}

}  // namespace gob::trainer
