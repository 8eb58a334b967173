#include <fstream>
#include <sstream>

#include "capnet/scenario.hpp"
#include "json.hpp"

namespace capnet {
namespace {

using Json = nlohmann::ordered_json;

const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ScenarioError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ScenarioError(where + ": missing field \"" + key + "\"");
  return *it;
}

double number(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_number()) throw ScenarioError(where + "." + key + ": expected a number");
  return v.get<double>();
}

const Json& array(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_array()) throw ScenarioError(where + "." + key + ": expected an array");
  return v;
}

Polygon parse_polygon(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ScenarioError(where + ": expected an array of [x, y] pairs");
  Polygon poly;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& v = j[i];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ScenarioError(where + "[" + std::to_string(i) + "]: expected [x, y]");
    }
    poly.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  if (poly.size() < 3) {
    throw ScenarioError(where + ": polygon has " + std::to_string(poly.size()) +
                        " vertices, need at least 3");
  }
  return poly;
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(std::string("malformed JSON: ") + e.what());
  }
  const Json& version = field(doc, "version", "document");
  if (!version.is_number_integer() || version.get<int>() != kScenarioFormatVersion) {
    throw ScenarioError("document.version: unsupported scenario format version " + version.dump());
  }

  Scenario sc;
  const Json& layers = array(field(doc, "map", "document"), "layers", "map");
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const std::string where = "map.layers[" + std::to_string(li) + "]";
    const Json& type = field(layers[li], "type", where);
    if (!type.is_string()) throw ScenarioError(where + ".type: expected a string");
    auto layer = parse_map_layer(type.get<std::string>());
    if (!layer) throw ScenarioError(where + ".type: unknown layer type " + type.dump());
    const Json& polys = array(layers[li], "polygons", where);
    for (std::size_t pi = 0; pi < polys.size(); ++pi) {
      sc.map.polygons(*layer).push_back(
          parse_polygon(polys[pi], where + ".polygons[" + std::to_string(pi) + "]"));
    }
  }

  const Json& tracks = array(doc, "tracks", "document");
  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    const std::string where = "tracks[" + std::to_string(ti) + "]";
    Track track;
    const Json& id = field(tracks[ti], "agent_id", where);
    if (!id.is_string()) throw ScenarioError(where + ".agent_id: expected a string");
    track.agent_id = id.get<std::string>();
    track.length_m = number(tracks[ti], "length_m", where);
    track.width_m = number(tracks[ti], "width_m", where);
    const Json& states = array(tracks[ti], "states", where);
    for (std::size_t si = 0; si < states.size(); ++si) {
      const std::string sw = where + ".states[" + std::to_string(si) + "]";
      const Json& s = states[si];
      track.states.push_back({number(s, "t", sw), number(s, "x", sw), number(s, "y", sw),
                              number(s, "vx", sw), number(s, "vy", sw), number(s, "ax", sw),
                              number(s, "ay", sw), number(s, "yaw", sw)});
    }
    try {
      track.validate();
    } catch (const ScenarioError& e) {
      throw ScenarioError(where + ": " + e.what());
    }
    sc.tracks.push_back(std::move(track));
  }
  sc.map.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ScenarioError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const ScenarioError& e) {
    throw ScenarioError(path.string() + ": " + e.what());
  }
}

std::string format_scenario(const Scenario& sc) {
  Json doc;
  doc["version"] = kScenarioFormatVersion;
  Json layers = Json::array();
  for (std::size_t l = 0; l < kMapLayerCount; ++l) {
    const auto layer = static_cast<SemanticLayer>(l);
    if (sc.map.polygons(layer).empty()) continue;
    Json polys = Json::array();
    for (const Polygon& poly : sc.map.polygons(layer)) {
      Json p = Json::array();
      for (const Vec2& v : poly) p.push_back({v.x, v.y});
      polys.push_back(std::move(p));
    }
    layers.push_back({{"type", std::string(layer_name(layer))}, {"polygons", std::move(polys)}});
  }
  doc["map"] = {{"layers", std::move(layers)}};
  Json tracks = Json::array();
  for (const Track& t : sc.tracks) {
    Json states = Json::array();
    for (const AgentState& s : t.states) {
      states.push_back({{"t", s.t}, {"x", s.x}, {"y", s.y}, {"vx", s.vx}, {"vy", s.vy},
                        {"ax", s.ax}, {"ay", s.ay}, {"yaw", s.yaw}});
    }
    tracks.push_back({{"agent_id", t.agent_id},
                      {"length_m", t.length_m},
                      {"width_m", t.width_m},
                      {"states", std::move(states)}});
  }
  doc["tracks"] = std::move(tracks);
  return doc.dump(2) + "\n";
}

void save_scenario(const std::filesystem::path& path, const Scenario& sc) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ScenarioError("cannot open " + path.string() + " for writing");
  os << format_scenario(sc);
  if (!os) throw ScenarioError("failed writing " + path.string());
}

}  // namespace capnet
