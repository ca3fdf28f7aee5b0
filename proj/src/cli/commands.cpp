// SPDX-License-Identifier: Apache-2.0
#include "gob/cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "gob/cli/config.hpp"
#include "gob/error.hpp"
#include "gob/sde/generators.hpp"
#include "gob/trainer/analysis.hpp"
#include "gob/trainer/checkpoint.hpp"
#include "gob/trainer/evaluate.hpp"
#include "gob/trainer/train.hpp"

namespace gob::cli {

namespace {

const std::vector<std::string> kModelKeys = {"hidden", "prep_size", "obs_hidden", "cell",
                                             "jump", "propagation", "bin_width"};
const std::vector<std::string> kSolverKeys = {"solver", "dt", "rtol", "atol", "max_steps"};
const std::vector<std::string> kLossKeys = {"lambda", "sigma_obs", "small_noise"};
const std::vector<std::string> kTrainKeys = {
    "learning_rate", "weight_decay", "dropout", "epochs", "batch_size",
    "patience",      "val_t_split",  "batch_timeline", "val_fraction"};

std::string fmt(double v, int precision = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c > 0) out << "  ";
      out << std::left << std::setw(static_cast<int>(width[c])) << r[c];
    }
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << body;
  if (!f) throw Error("write failed: " + path);
}

const data::SporadicSeries& pick_series(const data::Dataset& ds,
                                        const std::string& id) {
  if (ds.empty()) throw DataError("dataset is empty");
  if (id.empty()) return ds.front();
  for (const auto& s : ds) {
    if (s.id == id) return s;
  }
  throw DataError("series '" + id + "' not found");
}

std::string require(const RunConfig& c, const char* key) {
  const std::string v = c.get(key);
  if (v.empty()) throw ConfigError(std::string("missing ") + flag_name(key));
  return v;
}

solvers::SolverConfig solver_for(const RunConfig& c, const trainer::TrainConfig& ckpt) {
  solvers::SolverConfig s = ckpt.solver;
  if (c.is_set("solver")) s.method = c.train.solver.method;
  if (c.is_set("dt")) s.dt = c.train.solver.dt;
  if (c.is_set("rtol")) s.rtol = c.train.solver.rtol;
  if (c.is_set("atol")) s.atol = c.train.solver.atol;
  if (c.is_set("max_steps")) s.max_steps = c.train.solver.max_steps;
  s.validate();
  return s;
}

int cmd_generate(const RunConfig& c, std::ostream& out) {
  const std::string path = require(c, "out");
  const std::size_t n = c.n > 0 ? c.n : sde::default_size(c.setting);
  const auto ds = sde::make_dataset(c.setting, n, c.seed, c.first_id);
  data::save_csv(ds.series, path, 2);
  sde::write_metadata(path + ".meta", ds.metadata);
  out << "wrote " << ds.series.size() << " series ("
      << data::observation_rows(ds.series) << " observations) to " << path << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const std::string ckpt_path = require(c, "out");
  data::Dataset train_set = data::load_csv(require(c, "data"));
  data::Dataset val_set;
  if (!c.val_data.empty()) {
    val_set = data::load_csv(c.val_data);
  } else if (c.val_fraction > 0.0) {
    auto parts = data::split(train_set, {1.0 - c.val_fraction, c.val_fraction, 0.0},
                             sde::stream_seed(c.seed, 0x5b1));
    train_set = std::move(parts.train);
    val_set = std::move(parts.val);
  }
  trainer::ModelSpec spec = c.model;
  spec.dims = data::dataset_dims(train_set);
  const trainer::TrainConfig cfg = c.train_config();
  out << "training on " << train_set.size() << " series, validating on "
      << val_set.size() << '\n';
  auto result = trainer::train(
      trainer::make_model(spec, sde::stream_seed(c.seed, 0x1417)), train_set, val_set,
      cfg, [&](const trainer::EpochRecord& e) {
        out << "epoch " << e.epoch << "  train_loss " << fmt(e.train_loss)
            << "  val_negll " << fmt(e.val_negll) << "  val_mse " << fmt(e.val_mse)
            << "  (" << fmt(e.seconds, 3) << " s)\n";
        out.flush();
      });
  trainer::save_checkpoint({result.model, cfg}, ckpt_path);
  const std::string hist = c.history.empty() ? ckpt_path + ".history.csv" : c.history;
  trainer::write_history_csv(result.history, hist);
  out << "best epoch " << result.history.best_epoch << "; checkpoint " << ckpt_path
      << ", history " << hist << '\n';
  return kExitOk;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out) {
  const trainer::Checkpoint ckpt = trainer::load_checkpoint(require(c, "checkpoint"));
  const data::Dataset test = data::load_csv(require(c, "data"));
  const trainer::ModelPredictor predictor(ckpt.model, solver_for(c, ckpt.train));
  const trainer::Metrics m = trainer::evaluate(predictor, test, c.t_split, c.threads);
  print_table(out, {"metric", "value"},
              {{"mse", fmt(m.mse, 8)},
               {"negll", fmt(m.negll, 8)},
               {"entries", std::to_string(m.entries)},
               {"series", std::to_string(m.series)}});
  if (!c.out.empty()) {
    write_file(c.out, "metric,value\nmse," + csv_num(m.mse) + "\nnegll," +
                          csv_num(m.negll) + "\nentries," + std::to_string(m.entries) +
                          "\nseries," + std::to_string(m.series) + "\n");
  }
  return kExitOk;
}

int cmd_forecast(const RunConfig& c, std::ostream& out) {
  const trainer::Checkpoint ckpt = trainer::load_checkpoint(require(c, "checkpoint"));
  const data::Dataset ds = data::load_csv(require(c, "data"));
  const data::SporadicSeries& s = pick_series(ds, c.series_id);
  if (!(c.query_step > 0.0)) throw ConfigError("query_step must be positive");
  if (c.t_end < c.t_cond) throw ConfigError("t_end must not precede t_cond");
  std::vector<double> queries;
  for (std::size_t i = 0;; ++i) {
    const double t = c.t_cond + double(i) * c.query_step;
    if (t > c.t_end + 1e-9 * c.query_step) break;
    queries.push_back(std::min(t, c.t_end));
  }
  const auto preds =
      trainer::forecast(ckpt.model, s, c.t_cond, queries, solver_for(c, ckpt.train));
  std::string body = "time";
  const Eigen::Index dims = ckpt.model.spec.dims;
  for (Eigen::Index d = 0; d < dims; ++d) body += ",mu_" + std::to_string(d + 1);
  for (Eigen::Index d = 0; d < dims; ++d) body += ",sigma_" + std::to_string(d + 1);
  body += '\n';
  for (std::size_t q = 0; q < queries.size(); ++q) {
    body += csv_num(queries[q]);
    const Eigen::VectorXd sd = preds[q].stddev();
    for (Eigen::Index d = 0; d < dims; ++d) body += "," + csv_num(preds[q].mu[d]);
    for (Eigen::Index d = 0; d < dims; ++d) body += "," + csv_num(sd[d]);
    body += '\n';
  }
  if (c.out.empty()) {
    out << body;
  } else {
    write_file(c.out, body);
    out << "wrote " << queries.size() << " forecasts of series '" << s.id << "' to "
        << c.out << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& c, std::ostream& out) {
  trainer::ModelSpec spec = c.model;
  spec.dims = 2;
  if (!c.is_set("hidden")) spec.hidden = 8;
  trainer::ModelParams model = trainer::make_model(spec, sde::stream_seed(c.seed, 1));
  // Nonzero biases and h0 so that every parameter carries gradient.
  std::mt19937_64 rng(sde::stream_seed(c.seed, 2));
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (Eigen::Index i = 0; i < model.theta.size(); ++i) model.theta[i] += jitter(rng);
  model.project();

  auto ds = sde::make_dataset(sde::Setting::random_r, 16, c.seed).series;
  const data::SporadicSeries* src = nullptr;
  for (const auto& s : ds) {
    if (s.size() >= 3) {
      src = &s;
      break;
    }
  }
  if (src == nullptr) throw DataError("no generated series has three observations");
  data::SporadicSeries s;
  s.id = src->id;
  s.times = src->times.head(3);
  s.values = src->values.topRows(3);
  s.mask = src->mask.topRows(3);

  trainer::ForwardConfig fc;
  fc.solver = c.train.solver;
  fc.loss = c.train.loss;
  const auto r = trainer::pipeline_gradcheck(model, s, fc);
  const bool ok = r.comparison.passed;
  print_table(out, {"quantity", "value"},
              {{"parameters", std::to_string(model.theta.size())},
               {"loss", fmt(r.loss, 10)},
               {"max_relative_error", fmt(r.comparison.max_relative_error, 3)},
               {"max_absolute_error", fmt(r.comparison.max_absolute_error, 3)},
               {"result", ok ? "PASS" : "FAIL"}});
  return ok ? kExitOk : kExitRuntime;
}

int cmd_solvercmp(const RunConfig& c, std::ostream& out) {
  const trainer::Checkpoint ckpt = trainer::load_checkpoint(require(c, "checkpoint"));
  const data::Dataset ds = data::load_csv(require(c, "data"));
  const data::SporadicSeries& s = pick_series(ds, c.series_id);
  const double t_end = std::max(c.t_end, s.size() > 0 ? s.times[s.size() - 1] : 0.0);
  const auto cmp = trainer::compare_solvers(ckpt.model, s, t_end, c.target_error);
  std::vector<std::vector<std::string>> rows;
  std::string csv = "method,setting,steps,field_evals,terminal_error\n";
  for (const auto& r : cmp.runs) {
    rows.push_back({std::string(solvers::to_string(r.method)), fmt(r.setting, 3),
                    std::to_string(r.steps), std::to_string(r.field_evals),
                    fmt(r.terminal_error, 3)});
    csv += std::string(solvers::to_string(r.method)) + "," + csv_num(r.setting) + "," +
           std::to_string(r.steps) + "," + std::to_string(r.field_evals) + "," +
           csv_num(r.terminal_error) + "\n";
  }
  print_table(out, {"method", "setting", "steps", "field_evals", "terminal_error"}, rows);
  if (cmp.best_euler && cmp.best_dopri) {
    out << "at terminal error <= " << fmt(cmp.target_error, 3) << ": euler "
        << cmp.best_euler->steps << " steps, dopri " << cmp.best_dopri->steps
        << " steps (ratio " << fmt(double(cmp.best_dopri->steps) / double(cmp.best_euler->steps), 3)
        << ")\n";
  } else {
    out << "no run of one of the methods reached the target error\n";
  }
  if (!c.out.empty()) write_file(c.out, csv);
  return kExitOk;
}

struct Command {
  const char* name;
  const char* help;
  std::vector<std::string> keys;
  int (*fn)(const RunConfig&, std::ostream&);
};

std::vector<std::string> join(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const std::vector<Command> commands = {
      {"generate", "simulate a synthetic dataset (CSV plus .meta sidecar)",
       {"seed", "setting", "n", "first_id", "out"}, cmd_generate},
      {"train", "train a model and write a checkpoint",
       join({{"seed", "threads", "data", "val_data", "out", "history"}, kModelKeys,
             kTrainKeys, kLossKeys, kSolverKeys}),
       cmd_train},
      {"evaluate", "forecast held-out observations after t_split and score them",
       join({{"threads", "checkpoint", "data", "t_split", "out"}, kSolverKeys}),
       cmd_evaluate},
      {"forecast", "write mean and standard deviation on a query grid for one series",
       join({{"checkpoint", "data", "series_id", "t_cond", "t_end", "query_step", "out"},
             kSolverKeys}),
       cmd_forecast},
      {"gradcheck", "compare tape gradients with finite differences on a small model",
       join({{"seed"}, kModelKeys, kLossKeys, kSolverKeys}), cmd_gradcheck},
      {"solvercmp", "compare Euler and dopri step counts at matched terminal error",
       {"checkpoint", "data", "series_id", "t_end", "target_error", "out"}, cmd_solvercmp},
  };

  std::map<std::string, std::string> help_of;
  for (const auto& k : RunConfig::keys()) help_of[k.name] = k.help;

  CLI::App app{"gob: continuous-time GRU filtering of sporadic time series", "gob"};
  app.require_subcommand(1);
  app.fallthrough(false);
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::string> config_file;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    subs[cmd.name] = sub;
    sub->add_option("--config", config_file[cmd.name], "key=value configuration file");
    for (const auto& key : cmd.keys) {
      sub->add_option(flag_name(key), values[cmd.name][key], help_of.at(key));
    }
  }
  // Help output goes to `out`; CLI11 formats it.
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    CLI::App* target = nullptr;
    for (auto& [name, sub] : subs) {
      if (sub->parsed()) target = sub;
    }
    out << (target != nullptr ? target->help() : app.help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  for (const auto& cmd : commands) {
    CLI::App* sub = subs.at(cmd.name);
    if (!sub->parsed()) continue;
    try {
      RunConfig cfg;
      if (!config_file[cmd.name].empty()) cfg.load_file(config_file[cmd.name]);
      for (const auto& key : cmd.keys) {
        if (sub->count(flag_name(key)) > 0) cfg.set(key, values[cmd.name][key]);
      }
      return cmd.fn(cfg, out);
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitRuntime;
    }
  }
  err << "error: no subcommand given\n";
  return kExitUsage;
}

}  // namespace gob::cli
