#pragma once

#include <functional>
#include <span>
#include <vector>

#include "capnet/predictor.hpp"

namespace capnet {

struct TrainConfig {
  std::size_t epochs = 70;
  double lr = 5e-4;
  std::vector<std::size_t> decay_epochs{5, 20};
  double gamma = 0.1;
  double alpha = 1.0;  // MAE weight
  double beta = 1.0;   // MSE weight
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  double val_fraction = 0.1;
  std::size_t threads = 1;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string train_config_json(const TrainConfig& config);
/// Missing keys keep their defaults.
TrainConfig parse_train_config(std::string_view json);

/// alpha * mean|pred - target| + beta * mean (pred - target)^2 over every
/// scalar coordinate.
num::Var trajectory_loss(num::Var pred, num::Var target, double alpha, double beta);
double trajectory_loss(std::span<const float> pred, std::span<const float> target, double alpha, double beta);

/// Piecewise-constant rate: lr * gamma^(number of decay epochs <= epoch).
double lr_schedule(std::size_t epoch, const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean per-sample loss seen during the epoch
  double val_loss = 0.0;    // NaN without a validation set
  double val_ade = 0.0;     // selection metric, NaN without a validation set
};

struct TrainResult {
  Checkpoint best;  // best validation epoch, or the last epoch without validation
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double first_step_loss = 0.0;  // loss of the very first batch before any update
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam over shuffled batches. Samples of one track stay adjacent so their
/// shared chunk encodings are computed once per batch; each track's slice of
/// a batch is a shard whose gradients are added in a fixed order, so results
/// do not depend on the thread count.
TrainResult train(const ModelConfig& model, const TrainConfig& config, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const StandardizationStats& stats,
                  const EpochCallback& on_epoch = {});

/// Steps averaged by the model selection metric: up to 4 s.
std::size_t selection_steps(std::size_t tau);

}  // namespace capnet
