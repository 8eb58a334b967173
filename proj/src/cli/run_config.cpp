#include "capnet/run_config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace capnet {

using Json = nlohmann::ordered_json;

void RunConfig::validate() const {
  model.validate();
  train.validate();
}

std::vector<std::string> layer_order() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kLayerCount; ++i) out.emplace_back(layer_name(static_cast<SemanticLayer>(i)));
  return out;
}

std::string run_config_json(const RunConfig& c) {
  Json train = Json::parse(train_config_json(c.train));
  train.erase("seed");
  Json j;
  j["seed"] = c.train.seed;
  j["model"] = Json::parse(model_config_json(c.model));
  j["train"] = std::move(train);
  j["drop_out_of_map"] = c.drop_out_of_map;
  j["layer_order"] = layer_order();
  return j.dump(2) + "\n";
}

RunConfig parse_run_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("run config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("run config: expected an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "seed" && key != "model" && key != "train" && key != "drop_out_of_map" && key != "layer_order") {
      throw std::invalid_argument("run config: unknown key '" + key + "'");
    }
  }
  RunConfig c;
  try {
    if (j.contains("model")) c.model = parse_model_config(j.at("model").dump());
    if (j.contains("train")) {
      if (j.at("train").contains("seed")) throw std::invalid_argument("run config: set the seed at the top level");
      c.train = parse_train_config(j.at("train").dump());
    }
    if (j.contains("seed")) c.train.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("drop_out_of_map")) c.drop_out_of_map = j.at("drop_out_of_map").get<bool>();
    if (j.contains("layer_order") && j.at("layer_order").get<std::vector<std::string>>() != layer_order()) {
      std::string expected;
      for (const auto& name : layer_order()) expected += (expected.empty() ? "" : ", ") + name;
      throw std::invalid_argument("run config: layer_order must be " + expected);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string first_mismatch(const ModelConfig& a, const ModelConfig& b) {
  const Json ja = Json::parse(model_config_json(a)), jb = Json::parse(model_config_json(b));
  for (const auto& [key, value] : ja.items()) {
    if (value == jb.at(key)) continue;
    if (value.is_object()) {
      for (const auto& [sub, v] : value.items()) {
        if (v != jb.at(key).at(sub)) return key + "." + sub;
      }
    }
    return key;
  }
  return {};
}

}  // namespace capnet
