#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "capnet/map.hpp"
#include "capnet/raster.hpp"

namespace capnet {

inline constexpr std::size_t kStateFeatures = 5;  // vx, vy, ax, ay, yaw
using StateRow = std::array<double, kStateFeatures>;

StateRow state_features(const AgentState& s);

struct SampleConfig {
  std::size_t rho = 5;   // observed steps, current one included
  std::size_t tau = 12;  // predicted steps
  RasterConfig raster;

  void validate() const;
  friend bool operator==(const SampleConfig&, const SampleConfig&) = default;
};

struct StandardizationStats {
  StateRow mean{0, 0, 0, 0, 0};
  StateRow stddev{1, 1, 1, 1, 1};

  StateRow apply(const StateRow& row) const;
  StateRow invert(const StateRow& row) const;
  friend bool operator==(const StandardizationStats&, const StandardizationStats&) = default;
};

/// Population mean and standard deviation per feature. Features whose
/// standard deviation is below 1e-12 get 1 so they standardize to 0.
StandardizationStats compute_stats(std::span<const StateRow> rows);

/// One prediction window. Chunk rasters are produced on demand from the
/// shared scenario, since a full dataset of materialized stacks would not fit
/// in memory.
struct Sample {
  std::string scenario_id;
  std::string agent_id;
  double t = 0.0;                   // time of the last observed state
  std::vector<AgentState> observed;  // rho raw states, oldest first
  std::vector<float> state;          // [rho x 5] standardized
  std::vector<float> target;         // [tau x 2], p_{t+j+1} - p_t
  bool out_of_map = false;

  std::shared_ptr<const Scenario> scenario;
  std::size_t track_index = 0;

  std::vector<Vec2> chunk_origins() const;
  ChunkStack chunk(std::size_t step, const RasterConfig& cfg) const;
};

/// One sample per window of rho + tau consecutive states.
std::vector<Sample> build_samples(std::shared_ptr<const Scenario> scenario, std::size_t track_index,
                                  const std::string& scenario_id, const SampleConfig& cfg,
                                  const StandardizationStats& stats);

/// State rows of every observed window (duplicates included) for computing
/// standardization stats over a split.
std::vector<StateRow> observed_rows(const Scenario& scenario, const SampleConfig& cfg);

struct ScenarioFile {
  std::string id;  // file stem
  std::shared_ptr<const Scenario> scenario;
};

/// Loads every *.json scenario in `dir` except manifest.json, sorted by name.
std::vector<ScenarioFile> load_scenario_dir(const std::filesystem::path& dir);

struct Split {
  std::vector<ScenarioFile> train;
  std::vector<ScenarioFile> val;
};

/// Seeded scenario-level split; at least one scenario lands in train.
Split split_scenarios(std::vector<ScenarioFile> files, double val_fraction, std::uint64_t seed);

struct Dataset {
  std::vector<Sample> samples;
};

Dataset build_dataset(std::span<const ScenarioFile> files, const SampleConfig& cfg,
                      const StandardizationStats& stats, bool drop_out_of_map = false);
StandardizationStats compute_stats(std::span<const ScenarioFile> files, const SampleConfig& cfg);

}  // namespace capnet
