#include <cmath>
#include <limits>
#include <map>
#include <memory>

#include "capnet/adam.hpp"
#include "capnet/metrics.hpp"
#include "capnet/ops.hpp"
#include "capnet/train.hpp"
#include "json.hpp"
#include "parallel.hpp"

namespace capnet {
namespace {

// Sample indices per (scenario, track), in order of first appearance.
std::vector<std::vector<std::size_t>> track_groups(std::span<const Sample> samples) {
  std::map<std::pair<const Scenario*, std::size_t>, std::size_t> slot;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto key = std::make_pair(samples[i].scenario.get(), samples[i].track_index);
    auto [it, fresh] = slot.try_emplace(key, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

bool same_track(const Sample& a, const Sample& b) {
  return a.scenario == b.scenario && a.track_index == b.track_index;
}

struct Shard {
  std::unique_ptr<num::Tape> tape;
  double loss_sum = 0.0;
};

}  // namespace

std::size_t selection_steps(std::size_t tau) { return std::min<std::size_t>(tau, horizon_steps(4)); }

TrainResult train(const ModelConfig& model, const TrainConfig& config, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const StandardizationStats& stats, const EpochCallback& on_epoch) {
  model.validate();
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");

  PredictorParams params(model);
  params.init(config.seed);
  const std::vector<num::Parameter*> plist = params.parameters();
  num::AdamState adam;
  Rng rng(config.seed ^ 0x5deece66dULL);
  const auto groups = track_groups(train_set);

  TrainResult result;
  PredictorParams best = params;
  double best_val = std::numeric_limits<double>::infinity();
  bool first_step = true;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config);
    std::vector<std::size_t> order(groups.size());
    for (std::size_t g = 0; g < order.size(); ++g) order[g] = g;
    for (std::size_t g = order.size(); g > 1; --g) std::swap(order[g - 1], order[rng.below(g)]);
    std::vector<std::size_t> flat;
    flat.reserve(train_set.size());
    for (std::size_t g : order) flat.insert(flat.end(), groups[g].begin(), groups[g].end());

    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < flat.size(); b0 += config.batch_size) {
      const std::size_t b1 = std::min(flat.size(), b0 + config.batch_size);
      const float inv_n = 1.0f / static_cast<float>(b1 - b0);
      std::vector<std::pair<std::size_t, std::size_t>> ranges;
      for (std::size_t i = b0; i < b1;) {
        std::size_t j = i + 1;
        while (j < b1 && same_track(train_set[flat[j]], train_set[flat[i]])) ++j;
        ranges.emplace_back(i, j);
        i = j;
      }

      for (num::Parameter* p : plist) p->zero_grad();
      double batch_loss = 0.0;
      for (std::size_t w0 = 0; w0 < ranges.size(); w0 += config.threads) {
        const std::size_t w1 = std::min(ranges.size(), w0 + config.threads);
        std::vector<Shard> shards(w1 - w0);
        detail::parallel_for(shards.size(), config.threads, [&](std::size_t k) {
          Shard& sh = shards[k];
          sh.tape = std::make_unique<num::Tape>();
          num::Tape& tape = *sh.tape;
          const PredictorWeights w = bind(tape, params);
          ChunkEncoder enc(tape, w.caps);
          std::vector<num::Var> losses;
          for (std::size_t i = ranges[w0 + k].first; i < ranges[w0 + k].second; ++i) {
            const Sample& s = train_set[flat[i]];
            const num::Var y = forward(model, w, enc, s);
            const num::Var l = trajectory_loss(y, tape.constant(y.shape(), s.target), config.alpha, config.beta);
            sh.loss_sum += l.item();
            losses.push_back(l);
          }
          num::Var total = losses.front();
          for (std::size_t i = 1; i < losses.size(); ++i) total = num::add(total, losses[i]);
          tape.backward(num::scale(total, inv_n), false);
        });
        for (Shard& sh : shards) {
          sh.tape->accumulate_param_grads();
          batch_loss += sh.loss_sum;
        }
      }
      if (first_step) {
        result.first_step_loss = batch_loss / static_cast<double>(b1 - b0);
        first_step = false;
      }
      epoch_loss += batch_loss;
      num::adam_step(plist, adam, lr);
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_loss = epoch_loss / static_cast<double>(train_set.size());
    log.val_loss = std::numeric_limits<double>::quiet_NaN();
    log.val_ade = std::numeric_limits<double>::quiet_NaN();
    if (!val_set.empty()) {
      const auto preds = predict_all(params, val_set, config.threads);
      double vl = 0.0, va = 0.0;
      for (std::size_t i = 0; i < val_set.size(); ++i) {
        vl += trajectory_loss(preds[i], val_set[i].target, config.alpha, config.beta);
        va += ade_steps(to_trajectory(preds[i]), to_trajectory(val_set[i].target), selection_steps(model.sample.tau));
      }
      log.val_loss = vl / static_cast<double>(val_set.size());
      log.val_ade = va / static_cast<double>(val_set.size());
      if (log.val_ade < best_val) {
        best_val = log.val_ade;
        best = params;
        result.best_epoch = epoch;
      }
    } else {
      best = params;
      result.best_epoch = epoch;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  nlohmann::ordered_json summary;
  summary["epochs"] = config.epochs;
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_ade"] = val_set.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(best_val);
  summary["first_step_loss"] = result.first_step_loss;
  summary["final_train_loss"] = result.log.back().train_loss;
  summary["train_samples"] = train_set.size();
  summary["val_samples"] = val_set.size();
  summary["train_config"] = nlohmann::ordered_json::parse(train_config_json(config));
  result.best.params = std::move(best);
  result.best.stats = stats;
  result.best.training_summary = summary.dump();
  return result;
}

}  // namespace capnet
