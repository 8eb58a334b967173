#include <cmath>
#include <limits>

#include "capnet/metrics.hpp"
#include "parallel.hpp"

namespace capnet {
namespace {

double step_error(std::span<const double> pred, std::span<const double> truth, std::size_t j) {
  return std::hypot(pred[2 * j] - truth[2 * j], pred[2 * j + 1] - truth[2 * j + 1]);
}

void check_pair(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.size() % 2 != 0 || pred.empty()) {
    throw std::invalid_argument("metrics: prediction has " + std::to_string(pred.size()) +
                                " values, ground truth " + std::to_string(truth.size()));
  }
}

}  // namespace

Trajectory to_trajectory(std::span<const float> values) { return {values.begin(), values.end()}; }

std::vector<int> available_horizons(std::size_t tau) {
  std::vector<int> out;
  for (int h : kHorizonsSeconds) {
    if (horizon_steps(h) <= tau) out.push_back(h);
  }
  return out;
}

double ade_steps(std::span<const double> pred, std::span<const double> truth, std::size_t steps) {
  check_pair(pred, truth);
  if (steps == 0 || 2 * steps > pred.size()) {
    throw std::invalid_argument("metrics: " + std::to_string(steps) + " steps requested from a " +
                                std::to_string(pred.size() / 2) + "-step trajectory");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < steps; ++j) acc += step_error(pred, truth, j);
  return acc / static_cast<double>(steps);
}

double ade_all(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth);
  return ade_steps(pred, truth, pred.size() / 2);
}

std::vector<HorizonError> ade_fde(std::span<const double> pred, std::span<const double> truth,
                                  std::span<const int> horizons) {
  check_pair(pred, truth);
  const std::size_t tau = pred.size() / 2;
  std::vector<HorizonError> out;
  for (int h : horizons) {
    if (h <= 0 || horizon_steps(h) > tau) {
      throw std::invalid_argument("metrics: horizon " + std::to_string(h) + " s needs " +
                                  std::to_string(2 * std::max(h, 0)) + " steps, trajectory has " +
                                  std::to_string(tau));
    }
    const std::size_t n = horizon_steps(h);
    out.push_back({h, ade_steps(pred, truth, n), step_error(pred, truth, n - 1)});
  }
  return out;
}

MetricsReport evaluate(const std::string& name, std::span<const Sample> samples,
                       std::span<const std::vector<Trajectory>> candidates) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (candidates.size() != samples.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(candidates.size()) + " predictions for " +
                                std::to_string(samples.size()) + " samples");
  }
  const std::size_t tau = samples.front().target.size() / 2;
  const auto horizons = available_horizons(tau);
  MetricsReport report;
  report.model = name;
  report.samples = samples.size();
  for (int h : horizons) report.rows.push_back({h, 0.0, 0.0});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Trajectory truth = to_trajectory(samples[i].target);
    if (truth.size() != 2 * tau) throw std::invalid_argument("evaluate: samples disagree on tau");
    if (candidates[i].empty()) throw std::invalid_argument("evaluate: sample without prediction");
    std::vector<HorizonError> best;
    double best_all = std::numeric_limits<double>::infinity();
    for (const auto& pred : candidates[i]) {
      const auto rows = ade_fde(pred, truth, horizons);
      if (best.empty()) best = rows;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        best[k].ade = std::min(best[k].ade, rows[k].ade);
        best[k].fde = std::min(best[k].fde, rows[k].fde);
      }
      best_all = std::min(best_all, ade_all(pred, truth));
    }
    for (std::size_t k = 0; k < best.size(); ++k) {
      report.rows[k].ade += best[k].ade;
      report.rows[k].fde += best[k].fde;
    }
    report.ade_all += best_all;
  }
  const double n = static_cast<double>(samples.size());
  for (auto& r : report.rows) {
    r.ade /= n;
    r.fde /= n;
  }
  report.ade_all /= n;
  return report;
}

MetricsReport evaluate_predictions(const std::string& name, std::span<const Sample> samples,
                                   std::span<const std::vector<float>> predictions) {
  std::vector<std::vector<Trajectory>> c;
  c.reserve(predictions.size());
  for (const auto& p : predictions) c.push_back({to_trajectory(p)});
  return evaluate(name, samples, c);
}

MetricsReport evaluate_cvh(std::span<const Sample> samples) {
  std::vector<std::vector<Trajectory>> c;
  for (const Sample& s : samples) c.push_back({baseline_cvh(s.observed.back(), s.target.size() / 2)});
  return evaluate("Const. Vel. & Head.", samples, c);
}

MetricsReport evaluate_oracle(std::span<const Sample> samples, std::span<const PhysicsModel> members) {
  if (members.empty()) throw std::invalid_argument("evaluate_oracle: no member models");
  std::vector<std::vector<Trajectory>> c;
  for (const Sample& s : samples) {
    const AgentState& last = s.observed.back();
    const AgentState& prev = s.observed.size() > 1 ? s.observed[s.observed.size() - 2] : last;
    auto& row = c.emplace_back();
    for (PhysicsModel m : members) row.push_back(rollout(m, prev, last, s.target.size() / 2));
  }
  return evaluate("Physics Oracle", samples, c);
}

std::vector<std::vector<float>> predict_all(const PredictorParams& params, std::span<const Sample> samples,
                                            std::size_t threads) {
  // Runs of consecutive samples from the same track.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size();) {
    std::size_t j = i + 1;
    while (j < samples.size() && samples[j].scenario == samples[i].scenario &&
           samples[j].track_index == samples[i].track_index) {
      ++j;
    }
    groups.emplace_back(i, j);
    i = j;
  }
  std::vector<std::vector<float>> out(samples.size());
  detail::parallel_for(groups.size(), threads, [&](std::size_t g) {
    num::Tape tape;
    tape.set_grad_enabled(false);
    const PredictorWeights w = bind(tape, params);
    ChunkEncoder enc(tape, w.caps);
    for (std::size_t i = groups[g].first; i < groups[g].second; ++i) {
      const num::Var y = forward(params.config, w, enc, samples[i]);
      out[i].assign(y.value().begin(), y.value().end());
    }
  });
  return out;
}

MetricsReport evaluate_model(const std::string& name, const PredictorParams& params,
                             std::span<const Sample> samples, std::size_t threads) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  return evaluate_predictions(name, samples, predict_all(params, samples, threads));
}

}  // namespace capnet
