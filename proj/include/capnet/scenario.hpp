#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "capnet/map.hpp"
#include "capnet/rng.hpp"

namespace capnet {

inline constexpr int kScenarioFormatVersion = 1;

/// Parses the JSON interchange document. Errors carry the JSON location
/// (e.g. "tracks[0].states[3]").
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical serialization: fixed key order, 2-space indent, shortest
/// round-trip decimal numbers.
std::string format_scenario(const Scenario& scenario);
void save_scenario(const std::filesystem::path& path, const Scenario& scenario);

enum class ScenarioKind { Straight, Curve, Intersection };

std::string_view kind_name(ScenarioKind kind);
ScenarioKind parse_kind(std::string_view name);

struct GeneratorOptions {
  std::size_t states_per_track = 24;  // 12 s at 2 Hz
};

/// Deterministic synthetic road scene. Straight scenes use constant speeds;
/// curve and intersection scenes use constant longitudinal acceleration along
/// curved lane centerlines. Stored v, a and yaw are central differences of
/// the sampled positions.
Scenario generate_scenario(std::uint64_t seed, ScenarioKind kind, std::size_t n_agents,
                           const GeneratorOptions& options = {});

}  // namespace capnet
