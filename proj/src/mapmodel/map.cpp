#include "capnet/map.hpp"

#include <algorithm>
#include <cmath>

namespace capnet {
namespace {

constexpr std::array<std::string_view, kLayerCount> kLayerNames = {
    "drivable_area", "road_segment", "lane", "walkway", "agent_box"};

constexpr double kTimeTolerance = 1e-6;

}  // namespace

std::string_view layer_name(SemanticLayer layer) { return kLayerNames.at(layer_index(layer)); }

std::optional<SemanticLayer> parse_map_layer(std::string_view name) {
  for (std::size_t i = 0; i < kMapLayerCount; ++i) {
    if (kLayerNames[i] == name) return static_cast<SemanticLayer>(i);
  }
  return std::nullopt;
}

const std::vector<Polygon>& VectorMap::polygons(SemanticLayer layer) const {
  if (layer == SemanticLayer::AgentBox) throw std::invalid_argument("agent layer has no map polygons");
  return layers[layer_index(layer)];
}

std::vector<Polygon>& VectorMap::polygons(SemanticLayer layer) {
  if (layer == SemanticLayer::AgentBox) throw std::invalid_argument("agent layer has no map polygons");
  return layers[layer_index(layer)];
}

bool VectorMap::empty() const {
  return std::all_of(layers.begin(), layers.end(), [](const auto& l) { return l.empty(); });
}

std::optional<Bounds> VectorMap::bounds() const {
  std::optional<Bounds> b;
  for (const auto& layer : layers)
    for (const auto& poly : layer)
      for (const Vec2& v : poly) {
        if (!b) {
          b = Bounds{v.x, v.y, v.x, v.y};
          continue;
        }
        b->min_x = std::min(b->min_x, v.x);
        b->min_y = std::min(b->min_y, v.y);
        b->max_x = std::max(b->max_x, v.x);
        b->max_y = std::max(b->max_y, v.y);
      }
  return b;
}

void VectorMap::validate() const {
  for (std::size_t l = 0; l < kMapLayerCount; ++l) {
    for (std::size_t p = 0; p < layers[l].size(); ++p) {
      const Polygon& poly = layers[l][p];
      const std::string where =
          "map layer " + std::string(kLayerNames[l]) + " polygon " + std::to_string(p);
      if (poly.size() < 3) {
        throw ScenarioError(where + ": polygon has " + std::to_string(poly.size()) +
                            " vertices, need at least 3");
      }
      for (const Vec2& v : poly) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
          throw ScenarioError(where + ": non-finite vertex");
        }
      }
    }
  }
}

void Track::validate() const {
  const std::string where = "track " + agent_id;
  if (!(length_m > 0.0) || !(width_m > 0.0)) {
    throw ScenarioError(where + ": bounding box dimensions must be positive");
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    const AgentState& s = states[i];
    for (double v : {s.t, s.x, s.y, s.vx, s.vy, s.ax, s.ay, s.yaw}) {
      if (!std::isfinite(v)) {
        throw ScenarioError(where + " state " + std::to_string(i) + ": non-finite value");
      }
    }
    if (i == 0) continue;
    const double dt = s.t - states[i - 1].t;
    if (!(dt > 0.0)) {
      throw ScenarioError(where + " state " + std::to_string(i) +
                          ": timestamps must be strictly increasing");
    }
    if (std::fabs(dt - kStepSeconds) > kTimeTolerance) {
      throw ScenarioError(where + " state " + std::to_string(i) + ": expected " +
                          std::to_string(kStepSeconds) + " s spacing, got " + std::to_string(dt));
    }
  }
}

void Scenario::validate() const {
  map.validate();
  for (const Track& t : tracks) t.validate();
}

const Track* Scenario::find_track(std::string_view agent_id) const {
  for (const Track& t : tracks)
    if (t.agent_id == agent_id) return &t;
  return nullptr;
}

}  // namespace capnet
