#include "capnet/samples.hpp"

#include <algorithm>
#include <cmath>

#include "capnet/rng.hpp"
#include "capnet/scenario.hpp"

namespace capnet {

StateRow state_features(const AgentState& s) { return {s.vx, s.vy, s.ax, s.ay, s.yaw}; }

void SampleConfig::validate() const {
  if (rho == 0) throw std::invalid_argument("rho must be at least 1");
  if (tau == 0) throw std::invalid_argument("tau must be at least 1");
  raster.validate();
}

StateRow StandardizationStats::apply(const StateRow& row) const {
  StateRow out;
  for (std::size_t f = 0; f < kStateFeatures; ++f) out[f] = (row[f] - mean[f]) / stddev[f];
  return out;
}

StateRow StandardizationStats::invert(const StateRow& row) const {
  StateRow out;
  for (std::size_t f = 0; f < kStateFeatures; ++f) out[f] = row[f] * stddev[f] + mean[f];
  return out;
}

StandardizationStats compute_stats(std::span<const StateRow> rows) {
  if (rows.size() < 2) throw std::invalid_argument("standardization needs at least 2 state rows");
  StandardizationStats stats;
  const double n = static_cast<double>(rows.size());
  for (std::size_t f = 0; f < kStateFeatures; ++f) {
    double sum = 0.0;
    for (const StateRow& r : rows) sum += r[f];
    const double mean = sum / n;
    double sq = 0.0;
    for (const StateRow& r : rows) sq += (r[f] - mean) * (r[f] - mean);
    const double sd = std::sqrt(sq / n);
    stats.mean[f] = mean;
    stats.stddev[f] = sd < 1e-12 ? 1.0 : sd;
  }
  return stats;
}

std::vector<Vec2> Sample::chunk_origins() const {
  std::vector<Vec2> out;
  for (const AgentState& s : observed) out.push_back(s.position());
  return out;
}

ChunkStack Sample::chunk(std::size_t step, const RasterConfig& cfg) const {
  if (!scenario) throw std::logic_error("sample has no scenario attached");
  if (step >= observed.size()) throw std::out_of_range("chunk step out of range");
  const Track& track = scenario->tracks.at(track_index);
  return rasterize_chunk_stack(scenario->map, observed[step], track.length_m, track.width_m, cfg);
}

std::vector<Sample> build_samples(std::shared_ptr<const Scenario> scenario, std::size_t track_index,
                                  const std::string& scenario_id, const SampleConfig& cfg,
                                  const StandardizationStats& stats) {
  cfg.validate();
  const Track& track = scenario->tracks.at(track_index);
  const std::size_t window = cfg.rho + cfg.tau;
  std::vector<Sample> out;
  if (track.states.size() < window) return out;
  const auto extent = scenario->map.bounds();
  for (std::size_t first = 0; first + window <= track.states.size(); ++first) {
    Sample s;
    s.scenario_id = scenario_id;
    s.agent_id = track.agent_id;
    s.scenario = scenario;
    s.track_index = track_index;
    const std::size_t last = first + cfg.rho - 1;
    s.t = track.states[last].t;
    for (std::size_t k = first; k <= last; ++k) {
      const AgentState& st = track.states[k];
      s.observed.push_back(st);
      for (double v : stats.apply(state_features(st))) s.state.push_back(static_cast<float>(v));
      const Bounds w{st.x - cfg.raster.lambda_m, st.y - cfg.raster.lambda_m, st.x + cfg.raster.lambda_m,
                     st.y + cfg.raster.lambda_m};
      if (!extent || !extent->contains(w)) s.out_of_map = true;
    }
    const AgentState& now = track.states[last];
    for (std::size_t j = 1; j <= cfg.tau; ++j) {
      const AgentState& f = track.states[last + j];
      s.target.push_back(static_cast<float>(f.x - now.x));
      s.target.push_back(static_cast<float>(f.y - now.y));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<StateRow> observed_rows(const Scenario& scenario, const SampleConfig& cfg) {
  std::vector<StateRow> rows;
  const std::size_t window = cfg.rho + cfg.tau;
  for (const Track& track : scenario.tracks) {
    if (track.states.size() < window) continue;
    for (std::size_t first = 0; first + window <= track.states.size(); ++first) {
      for (std::size_t k = first; k < first + cfg.rho; ++k) rows.push_back(state_features(track.states[k]));
    }
  }
  return rows;
}

std::vector<ScenarioFile> load_scenario_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ScenarioError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (entry.is_regular_file() && p.extension() == ".json" && p.filename() != "manifest.json") {
      paths.push_back(p);
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ScenarioFile> out;
  for (const auto& p : paths) {
    out.push_back({p.stem().string(), std::make_shared<const Scenario>(load_scenario(p))});
  }
  return out;
}

Split split_scenarios(std::vector<ScenarioFile> files, double val_fraction, std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw std::invalid_argument("validation fraction must be in [0, 1)");
  }
  Rng rng(seed);
  for (std::size_t i = files.size(); i > 1; --i) std::swap(files[i - 1], files[rng.below(i)]);
  auto n_val = static_cast<std::size_t>(std::round(val_fraction * static_cast<double>(files.size())));
  if (n_val >= files.size()) n_val = files.empty() ? 0 : files.size() - 1;
  Split split;
  split.val.assign(files.begin(), files.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(files.begin() + static_cast<std::ptrdiff_t>(n_val), files.end());
  auto by_id = [](const ScenarioFile& a, const ScenarioFile& b) { return a.id < b.id; };
  std::sort(split.train.begin(), split.train.end(), by_id);
  std::sort(split.val.begin(), split.val.end(), by_id);
  return split;
}

Dataset build_dataset(std::span<const ScenarioFile> files, const SampleConfig& cfg,
                      const StandardizationStats& stats, bool drop_out_of_map) {
  Dataset ds;
  for (const ScenarioFile& f : files) {
    for (std::size_t ti = 0; ti < f.scenario->tracks.size(); ++ti) {
      for (Sample& s : build_samples(f.scenario, ti, f.id, cfg, stats)) {
        if (drop_out_of_map && s.out_of_map) continue;
        ds.samples.push_back(std::move(s));
      }
    }
  }
  return ds;
}

StandardizationStats compute_stats(std::span<const ScenarioFile> files, const SampleConfig& cfg) {
  std::vector<StateRow> rows;
  for (const ScenarioFile& f : files) {
    auto r = observed_rows(*f.scenario, cfg);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return compute_stats(rows);
}

}  // namespace capnet
