#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "capnet/predictor.hpp"

namespace capnet {

inline constexpr std::array<int, 6> kHorizonsSeconds{1, 2, 3, 4, 5, 6};

/// Steps covered by a horizon at 2 Hz.
constexpr std::size_t horizon_steps(int seconds) { return static_cast<std::size_t>(2 * seconds); }

/// [tau x 2] displacements from the last observed position, in meters.
using Trajectory = std::vector<double>;
Trajectory to_trajectory(std::span<const float> values);

/// Horizons from kHorizonsSeconds that fit in tau steps.
std::vector<int> available_horizons(std::size_t tau);

struct HorizonError {
  int seconds = 0;
  double ade = 0.0;
  double fde = 0.0;
  friend bool operator==(const HorizonError&, const HorizonError&) = default;
};

/// Trajectories are [tau x 2] displacements. Throws std::invalid_argument when
/// a horizon needs more steps than given.
std::vector<HorizonError> ade_fde(std::span<const double> pred, std::span<const double> truth,
                                  std::span<const int> horizons);
/// Mean displacement over all steps of the trajectory.
double ade_all(std::span<const double> pred, std::span<const double> truth);
/// Mean displacement over the first `steps` steps.
double ade_steps(std::span<const double> pred, std::span<const double> truth, std::size_t steps);

enum class PhysicsModel { ConstVelocity, ConstAcceleration, ConstTurnRateVelocity, ConstTurnRateAcceleration };

inline constexpr std::array<PhysicsModel, 4> kOracleMembers{
    PhysicsModel::ConstVelocity, PhysicsModel::ConstAcceleration, PhysicsModel::ConstTurnRateVelocity,
    PhysicsModel::ConstTurnRateAcceleration};

std::string physics_model_name(PhysicsModel m);

/// (yaw_last - yaw_prev) / dt with the difference wrapped to (-pi, pi].
double turn_rate(const AgentState& prev, const AgentState& last);

/// Displacements from the last position for tau steps of 0.5 s. Heading is the
/// last yaw; speeds never go negative.
Trajectory rollout(PhysicsModel model, const AgentState& prev, const AgentState& last, std::size_t tau);

/// j * dt * v for j = 1..tau.
Trajectory baseline_cvh(const AgentState& last, std::size_t tau);

/// Member rollout with the smallest summed L2 error against `truth`.
Trajectory physics_oracle(const AgentState& prev, const AgentState& last, std::size_t tau,
                          std::span<const double> truth, std::span<const PhysicsModel> members = kOracleMembers);

struct MetricsReport {
  std::string model;
  std::size_t samples = 0;
  std::vector<HorizonError> rows;
  double ade_all = 0.0;
};

/// Every sample contributes its candidate trajectories; each cell takes the
/// smallest error over the candidates (a single candidate for models and
/// CV&H, the member rollouts for the oracle) and the mean over samples.
MetricsReport evaluate(const std::string& name, std::span<const Sample> samples,
                       std::span<const std::vector<Trajectory>> candidates);
MetricsReport evaluate_predictions(const std::string& name, std::span<const Sample> samples,
                                   std::span<const std::vector<float>> predictions);
MetricsReport evaluate_cvh(std::span<const Sample> samples);
MetricsReport evaluate_oracle(std::span<const Sample> samples,
                              std::span<const PhysicsModel> members = kOracleMembers);

/// Inference over a dataset. Consecutive samples of one track share a tape so
/// their common chunks are encoded once; output order matches the input.
std::vector<std::vector<float>> predict_all(const PredictorParams& params, std::span<const Sample> samples,
                                            std::size_t threads = 1);
MetricsReport evaluate_model(const std::string& name, const PredictorParams& params,
                             std::span<const Sample> samples, std::size_t threads = 1);

std::string report_json(const MetricsReport& report);
/// Aligned "ADE/FDE" table with one row per report, followed by the published
/// constant-velocity reference row.
std::string report_table(std::span<const MetricsReport> reports, bool with_reference = true);

/// Published CV&H row on nuScenes, 1 s to 6 s, for context only.
inline constexpr std::array<HorizonError, 6> kReferenceCvh{{{1, 0.48, 0.66},
                                                            {2, 0.96, 1.75},
                                                            {3, 1.60, 3.32},
                                                            {4, 2.38, 5.30},
                                                            {5, 3.28, 7.61},
                                                            {6, 4.28, 10.22}}};

}  // namespace capnet
