// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch training with Adam and early stopping on validation NegLL.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "gob/data/series.hpp"
#include "gob/losses/gaussian.hpp"
#include "gob/solvers/integrate.hpp"
#include "gob/trainer/model.hpp"

namespace gob::trainer {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  /// Dropout rate on the observation model's hidden layer.
  double dropout = 0.0;
  losses::LossConfig loss;
  std::size_t epochs = 50;
  std::size_t batch_size = 100;
  /// Epochs without validation improvement before stopping; 0 disables.
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  solvers::SolverConfig solver;
  /// Validation forecasts condition on observations before this time.
  double val_t_split = 4.0;
  unsigned threads = 1;
  /// Propagate each batch jointly on its timeline instead of per series.
  bool batch_timeline = false;

  void validate() const;
};

/// Grid values searched for each hyperparameter.
inline const std::vector<double> kLearningRateGrid = {1e-3, 1e-4};
inline const std::vector<double> kWeightDecayGrid = {0.1,   0.03,  0.01, 0.003,
                                                     0.001, 0.0001, 0.0};
inline const std::vector<double> kDropoutGrid = {0.0, 0.1, 0.2, 0.3};

struct EpochRecord {
  std::size_t epoch = 0;
  /// Mean over the epoch's batches of the mean per-series loss.
  double train_loss = 0.0;
  /// NaN without a validation set.
  double val_negll = 0.0;
  double val_mse = 0.0;
  double seconds = 0.0;
};

struct History {
  std::vector<EpochRecord> epochs;
  /// Epoch whose parameters were returned (1-based; 0 = initial).
  std::size_t best_epoch = 0;
  double best_val_negll = 0.0;
};

void write_history_csv(const History& h, const std::filesystem::path& path);

struct BatchGradient {
  /// Mean per-series loss.
  double loss = 0.0;
  Eigen::VectorXd grad;
  std::size_t entries = 0;
};

/// Mean loss of the series `batch` (indices into ds) and its gradient.
/// Per-series dropout streams derive from `dropout_seed`.
BatchGradient batch_gradient(const ModelParams& model, const data::Dataset& ds,
                             const std::vector<std::size_t>& batch,
                             const TrainConfig& cfg,
                             std::uint64_t dropout_seed = 0);

/// Mean per-series loss over a whole dataset without gradients or dropout.
double dataset_loss(const ModelParams& model, const data::Dataset& ds,
                    const TrainConfig& cfg);

/// Adam with decoupled weight decay.
class Adam {
 public:
  explicit Adam(Eigen::Index size, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr,
            double weight_decay);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  std::size_t t_ = 0;
};

struct TrainResult {
  ModelParams model;
  History history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Returns the parameters of the epoch with the best validation NegLL (the
/// last epoch without a validation set).
TrainResult train(ModelParams init, const data::Dataset& train_set,
                  const data::Dataset& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace gob::trainer
