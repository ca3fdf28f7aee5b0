// SPDX-License-Identifier: Apache-2.0
#include "gob/trainer/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <string>

#include "gob/error.hpp"
#include "gob/sde/generators.hpp"
#include "gob/trainer/evaluate.hpp"
#include "gob/trainer/forward.hpp"
#include "gob/trainer/parallel.hpp"

namespace gob::trainer {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  loss.validate();
  solver.validate();
}

void write_history_csv(const History& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,train_loss,val_negll\n";
  char buf[96];
  for (const auto& e : h.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e.epoch, e.train_loss,
                  e.val_negll);
    out << buf;
  }
  if (!out) throw Error("write failed: " + path.string());
}

namespace {

struct SeriesGradient {
  double loss = 0.0;
  std::size_t entries = 0;
  Eigen::VectorXd grad;
};

ForwardConfig forward_config(const TrainConfig& cfg) {
  ForwardConfig f;
  f.solver = cfg.solver;
  f.loss = cfg.loss;
  return f;
}

}  // namespace

BatchGradient batch_gradient(const ModelParams& model, const data::Dataset& ds,
                             const std::vector<std::size_t>& batch,
                             const TrainConfig& cfg, std::uint64_t dropout_seed) {
  BatchGradient out;
  out.grad = Eigen::VectorXd::Zero(model.layout.size());
  if (batch.empty()) return out;
  const double scale = 1.0 / double(batch.size());

  if (cfg.batch_timeline) {
    diff::Tape tape;
    BoundModel m(tape, model);
    ForwardConfig f = forward_config(cfg);
    std::mt19937_64 rng(dropout_seed);
    f.dropout = grubayes::Dropout{cfg.dropout, &rng};
    const ForwardResult r = forward_batch(m, ds, batch, std::nullopt, f);
    tape.backward(r.loss, scale);
    m.params.accumulate_gradient(out.grad);
    out.loss = r.loss.scalar() * scale;
    out.entries = r.observed_entries;
    return out;
  }

  const unsigned workers = std::max(1u, cfg.threads);
  std::vector<std::unique_ptr<diff::Tape>> tapes;
  for (unsigned w = 0; w < workers; ++w) tapes.push_back(std::make_unique<diff::Tape>());
  std::vector<SeriesGradient> parts(workers > 1 ? batch.size() : 0);
  double loss = 0.0;
  parallel_for(batch.size(), workers, [&](std::size_t i, unsigned w) {
    diff::Tape& tape = *tapes[w];
    tape.clear();
    BoundModel m(tape, model);
    ForwardConfig f = forward_config(cfg);
    std::mt19937_64 rng(sde::stream_seed(dropout_seed, i));
    f.dropout = grubayes::Dropout{cfg.dropout, &rng};
    const ForwardResult r = forward_pass(m, ds.at(batch[i]), std::nullopt, f);
    tape.backward(r.loss, scale);
    if (workers > 1) {
      parts[i].grad = Eigen::VectorXd::Zero(model.layout.size());
      m.params.accumulate_gradient(parts[i].grad);
      parts[i].loss = r.loss.scalar();
      parts[i].entries = r.observed_entries;
    } else {
      m.params.accumulate_gradient(out.grad);
      loss += r.loss.scalar();
      out.entries += r.observed_entries;
    }
  });
  if (workers > 1) {
    for (const auto& p : parts) {
      out.grad += p.grad;
      loss += p.loss;
      out.entries += p.entries;
    }
  }
  out.loss = loss * scale;
  return out;
}

double dataset_loss(const ModelParams& model, const data::Dataset& ds,
                    const TrainConfig& cfg) {
  if (ds.empty()) throw DataError("dataset_loss on an empty dataset");
  const unsigned workers = std::max(1u, cfg.threads);
  std::vector<std::unique_ptr<diff::Tape>> tapes;
  for (unsigned w = 0; w < workers; ++w) tapes.push_back(std::make_unique<diff::Tape>());
  std::vector<double> losses(ds.size());
  parallel_for(ds.size(), workers, [&](std::size_t i, unsigned w) {
    diff::Tape& tape = *tapes[w];
    tape.clear();
    BoundModel m(tape, model);
    losses[i] = forward_pass(m, ds[i], std::nullopt, forward_config(cfg)).loss.scalar();
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / double(ds.size());
}

Adam::Adam(Eigen::Index size, double beta1, double beta2, double eps)
    : beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr,
                double weight_decay) {
  if (grad.size() != theta.size() || theta.size() != m_.size()) {
    throw ShapeError("Adam: parameter and gradient sizes differ");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, double(t_));
  const double c2 = 1.0 - std::pow(beta2_, double(t_));
  if (weight_decay > 0.0) theta *= 1.0 - lr * weight_decay;
  theta.array() -=
      lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

TrainResult train(ModelParams init, const data::Dataset& train_set,
                  const data::Dataset& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  TrainResult out{init, {}};
  ModelParams& model = out.model;
  model.project();
  Adam adam(model.layout.size());
  std::mt19937_64 shuffle(sde::stream_seed(cfg.seed, 0x5eed));

  const bool validate = !val_set.empty();
  ModelParams best = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches = data::make_batches(train_set.size(), cfg.batch_size, shuffle);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const std::uint64_t dropout_seed =
          sde::stream_seed(cfg.seed ^ 0xd50f, epoch * 1000003ULL + b);
      BatchGradient g;
      try {
        g = batch_gradient(model, train_set, batches[b], cfg, dropout_seed);
      } catch (const NonFiniteError& e) {
        throw Error("epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(b + 1) + ": " + e.what());
      }
      if (!std::isfinite(g.loss) || !g.grad.allFinite()) {
        throw Error("epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(b + 1) + ": non-finite loss or gradient");
      }
      adam.step(model.theta, g.grad, cfg.learning_rate, cfg.weight_decay);
      model.project();
      loss_sum += g.loss;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / double(batches.size());
    rec.val_negll = std::numeric_limits<double>::quiet_NaN();
    rec.val_mse = std::numeric_limits<double>::quiet_NaN();
    if (validate) {
      const Metrics vm =
          evaluate(ModelPredictor(model, cfg.solver), val_set, cfg.val_t_split,
                   cfg.threads);
      rec.val_negll = vm.negll;
      rec.val_mse = vm.mse;
    }
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    out.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (validate) {
      if (rec.val_negll < best_val) {
        best_val = rec.val_negll;
        best = model;
        out.history.best_epoch = epoch;
        since_best = 0;
      } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
        break;
      }
    }
  }
  if (validate) {
    out.history.best_val_negll = best_val;
    out.model = std::move(best);
  } else {
    out.history.best_epoch = out.history.epochs.size();
    out.history.best_val_negll = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace gob::trainer
