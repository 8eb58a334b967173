#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace capnet {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Raster channel order. Indices are stable: capsule weights and checkpoints
/// depend on them.
enum class SemanticLayer : std::uint8_t {
  DrivableArea = 0,
  RoadSegment = 1,
  Lane = 2,
  Walkway = 3,
  AgentBox = 4,
};

inline constexpr std::size_t kMapLayerCount = 4;
inline constexpr std::size_t kLayerCount = 5;
inline constexpr double kStepSeconds = 0.5;  // 2 Hz annotations

std::string_view layer_name(SemanticLayer layer);
std::optional<SemanticLayer> parse_map_layer(std::string_view name);
inline std::size_t layer_index(SemanticLayer layer) { return static_cast<std::size_t>(layer); }

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Polygon = std::vector<Vec2>;

struct Bounds {
  double min_x, min_y, max_x, max_y;
  bool contains(const Bounds& other) const {
    return other.min_x >= min_x && other.max_x <= max_x && other.min_y >= min_y &&
           other.max_y <= max_y;
  }
};

struct VectorMap {
  std::array<std::vector<Polygon>, kMapLayerCount> layers;

  const std::vector<Polygon>& polygons(SemanticLayer layer) const;
  std::vector<Polygon>& polygons(SemanticLayer layer);
  bool empty() const;
  std::optional<Bounds> bounds() const;
  /// Throws ScenarioError naming the offending layer and polygon.
  void validate() const;

  friend bool operator==(const VectorMap&, const VectorMap&) = default;
};

struct AgentState {
  double t = 0.0;
  double x = 0.0, y = 0.0;
  double vx = 0.0, vy = 0.0;
  double ax = 0.0, ay = 0.0;
  double yaw = 0.0;

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct Track {
  std::string agent_id;
  double length_m = 4.5;
  double width_m = 1.9;
  std::vector<AgentState> states;

  /// Strictly increasing timestamps spaced kStepSeconds apart, finite values,
  /// positive box dimensions.
  void validate() const;

  friend bool operator==(const Track&, const Track&) = default;
};

struct Scenario {
  VectorMap map;
  std::vector<Track> tracks;

  void validate() const;
  const Track* find_track(std::string_view agent_id) const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

}  // namespace capnet
