#include <cmath>

#include "capnet/ops.hpp"
#include "capnet/train.hpp"
#include "json.hpp"

namespace capnet {

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("train: epochs must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  for (std::size_t i = 1; i < decay_epochs.size(); ++i) {
    if (decay_epochs[i] <= decay_epochs[i - 1]) {
      throw std::invalid_argument("train: decay_epochs must be strictly increasing");
    }
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("train: gamma must be positive");
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("train: alpha and beta must be non-negative");
  if (alpha == 0.0 && beta == 0.0) throw std::invalid_argument("train: alpha and beta cannot both be zero");
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (val_fraction < 0.0 || val_fraction >= 1.0) throw std::invalid_argument("train: val_fraction must be in [0, 1)");
  if (threads == 0) throw std::invalid_argument("train: threads must be positive");
}

std::string train_config_json(const TrainConfig& c) {
  nlohmann::ordered_json j{{"epochs", c.epochs},     {"lr", c.lr},
                           {"decay_epochs", c.decay_epochs}, {"gamma", c.gamma},
                           {"alpha", c.alpha},       {"beta", c.beta},
                           {"batch_size", c.batch_size}, {"seed", c.seed},
                           {"val_fraction", c.val_fraction}, {"threads", c.threads}};
  return j.dump(2);
}

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    auto read = [&](const char* key, auto& out) {
      if (j.contains(key)) out = j.at(key).get<std::remove_reference_t<decltype(out)>>();
    };
    read("epochs", c.epochs);
    read("lr", c.lr);
    read("decay_epochs", c.decay_epochs);
    read("gamma", c.gamma);
    read("alpha", c.alpha);
    read("beta", c.beta);
    read("batch_size", c.batch_size);
    read("seed", c.seed);
    read("val_fraction", c.val_fraction);
    read("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

num::Var trajectory_loss(num::Var pred, num::Var target, double alpha, double beta) {
  if (pred.shape() != target.shape()) {
    throw num::ShapeError("loss: prediction " + num::shape_string(pred.shape()) + " vs target " +
                          num::shape_string(target.shape()));
  }
  const num::Var d = num::sub(pred, target);
  return num::add(num::scale(num::mean(num::abs(d)), static_cast<float>(alpha)),
                  num::scale(num::mean(num::square(d)), static_cast<float>(beta)));
}

double trajectory_loss(std::span<const float> pred, std::span<const float> target, double alpha, double beta) {
  if (pred.size() != target.size() || pred.empty()) {
    throw num::ShapeError("loss: " + std::to_string(pred.size()) + " predicted values vs " +
                          std::to_string(target.size()) + " targets");
  }
  double mae = 0.0, mse = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = static_cast<double>(pred[k]) - target[k];
    mae += std::abs(d);
    mse += d * d;
  }
  const double n = static_cast<double>(pred.size());
  return alpha * mae / n + beta * mse / n;
}

double lr_schedule(std::size_t epoch, const TrainConfig& config) {
  double lr = config.lr;
  for (std::size_t e : config.decay_epochs) {
    if (epoch >= e) lr *= config.gamma;
  }
  return lr;
}

}  // namespace capnet
