// SPDX-License-Identifier: Apache-2.0
#include "gob/cli/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>

#include "gob/error.hpp"

namespace gob::cli {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return std::string(s);
}

[[noreturn]] void bad(std::string_view key, std::string_view value,
                      const char* expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " +
                    std::string(key) + " (expected " + expected + ")");
}

double to_double(std::string_view key, std::string_view v) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
    bad(key, v, "a number");
  }
  return x;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
    bad(key, v, "a non-negative integer");
  }
  return x;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  bad(key, v, "a boolean");
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Entry {
  KeyInfo info;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define GOB_REAL(name, help, expr)                                              \
  Entry {                                                                       \
    {name, help}, [](RunConfig& c, std::string_view v) { expr = to_double(name, v); }, \
        [](const RunConfig& c) { return num(expr); }                            \
  }
#define GOB_UINT(name, help, expr, type)                                        \
  Entry {                                                                       \
    {name, help},                                                               \
        [](RunConfig& c, std::string_view v) {                                  \
          expr = static_cast<type>(to_uint(name, v));                           \
        },                                                                      \
        [](const RunConfig& c) { return std::to_string(expr); }                 \
  }
#define GOB_BOOL(name, help, expr)                                              \
  Entry {                                                                       \
    {name, help}, [](RunConfig& c, std::string_view v) { expr = to_bool(name, v); }, \
        [](const RunConfig& c) { return std::string(expr ? "1" : "0"); }        \
  }
#define GOB_STR(name, help, expr)                                               \
  Entry {                                                                       \
    {name, help}, [](RunConfig& c, std::string_view v) { expr = std::string(v); }, \
        [](const RunConfig& c) { return expr; }                                 \
  }

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      GOB_UINT("seed", "master random seed", c.seed, std::uint64_t),
      GOB_UINT("threads", "worker threads for per-series passes", c.threads, unsigned),
      Entry{{"setting", "generator setting: random_r, random_lag, rho0, brusselator"},
            [](RunConfig& c, std::string_view v) { c.setting = sde::parse_setting(v); },
            [](const RunConfig& c) { return std::string(sde::to_string(c.setting)); }},
      GOB_UINT("n", "number of series to generate (0 = setting default)", c.n, std::size_t),
      GOB_UINT("first_id", "id of the first generated series", c.first_id, std::size_t),
      GOB_STR("data", "input dataset CSV", c.data),
      GOB_STR("val_data", "validation dataset CSV (default: split off data)", c.val_data),
      GOB_STR("out", "output path", c.out),
      GOB_STR("checkpoint", "model checkpoint path", c.checkpoint),
      GOB_STR("history", "training history CSV path", c.history),
      GOB_UINT("hidden", "hidden state size H", c.model.hidden, diff::Index),
      GOB_UINT("prep_size", "per-dimension preprocessing width p", c.model.prep_size, diff::Index),
      GOB_UINT("obs_hidden", "observation model hidden width", c.model.obs_hidden, diff::Index),
      Entry{{"cell", "ODE cell: full or minimal"},
            [](RunConfig& c, std::string_view v) { c.model.cell = gruode::parse_cell_variant(v); },
            [](const RunConfig& c) { return std::string(gruode::to_string(c.model.cell)); }},
      Entry{{"jump", "jump update: joint, seq or mlp"},
            [](RunConfig& c, std::string_view v) { c.model.jump = grubayes::parse_jump_variant(v); },
            [](const RunConfig& c) { return std::string(grubayes::to_string(c.model.jump)); }},
      Entry{{"propagation", "between observations: ode or discretized"},
            [](RunConfig& c, std::string_view v) { c.model.propagation = trainer::parse_propagation(v); },
            [](const RunConfig& c) { return std::string(trainer::to_string(c.model.propagation)); }},
      GOB_REAL("bin_width", "bin width of discretized propagation", c.model.bin_width),
      GOB_REAL("learning_rate", "Adam learning rate", c.train.learning_rate),
      GOB_REAL("weight_decay", "decoupled weight decay", c.train.weight_decay),
      GOB_REAL("dropout", "dropout on the observation model hidden layer", c.train.dropout),
      GOB_REAL("lambda", "weight of the post-jump loss", c.train.loss.lambda),
      GOB_REAL("sigma_obs", "observation noise standard deviation", c.train.loss.sigma_obs),
      GOB_BOOL("small_noise", "use the observation itself as the Bayes posterior",
               c.train.loss.small_noise_mode),
      GOB_UINT("epochs", "maximum number of epochs", c.train.epochs, std::size_t),
      GOB_UINT("batch_size", "series per batch", c.train.batch_size, std::size_t),
      GOB_UINT("patience", "early-stopping patience in epochs (0 = off)", c.train.patience,
               std::size_t),
      GOB_REAL("val_t_split", "validation forecast split time", c.train.val_t_split),
      GOB_BOOL("batch_timeline", "propagate batches jointly on their timeline",
               c.train.batch_timeline),
      GOB_REAL("val_fraction", "validation share split off data", c.val_fraction),
      Entry{{"solver", "integrator: euler, midpoint or dopri"},
            [](RunConfig& c, std::string_view v) { c.train.solver.method = solvers::parse_method(v); },
            [](const RunConfig& c) { return std::string(solvers::to_string(c.train.solver.method)); }},
      GOB_REAL("dt", "fixed solver step", c.train.solver.dt),
      GOB_REAL("rtol", "adaptive solver relative tolerance", c.train.solver.rtol),
      GOB_REAL("atol", "adaptive solver absolute tolerance", c.train.solver.atol),
      GOB_UINT("max_steps", "solver step limit per interval", c.train.solver.max_steps,
               std::size_t),
      GOB_REAL("t_split", "evaluation split time", c.t_split),
      GOB_REAL("t_cond", "forecast conditioning time", c.t_cond),
      GOB_REAL("t_end", "forecast or comparison end time", c.t_end),
      GOB_REAL("query_step", "forecast query grid spacing", c.query_step),
      GOB_STR("series_id", "series to forecast or compare (default: first)", c.series_id),
      GOB_REAL("target_error", "terminal error target of solvercmp", c.target_error),
  };
  return entries;
}

#undef GOB_REAL
#undef GOB_UINT
#undef GOB_BOOL
#undef GOB_STR

const Entry& find(std::string_view key) {
  for (const auto& e : table()) {
    if (e.info.name == key) return e;
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<KeyInfo>& RunConfig::keys() {
  static const std::vector<KeyInfo> infos = [] {
    std::vector<KeyInfo> out;
    for (const auto& e : table()) out.push_back(e.info);
    return out;
  }();
  return infos;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const Entry& e = find(key);
  e.set(*this, trim(value));
  explicit_keys.insert(e.info.name);
}

std::string RunConfig::get(std::string_view key) const { return find(key).get(*this); }

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value");
    }
    try {
      set(trim(std::string_view(t).substr(0, eq)),
          std::string_view(t).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
}

trainer::TrainConfig RunConfig::train_config() const {
  trainer::TrainConfig t = train;
  t.seed = seed;
  t.threads = threads;
  return t;
}

std::string flag_name(std::string_view key) {
  std::string f = "--";
  for (char ch : key) f += ch == '_' ? '-' : ch;
  return f;
}

}  // namespace gob::cli
