#pragma once

#include <filesystem>
#include <string>

#include "capnet/predictor.hpp"
#include "capnet/train.hpp"

namespace capnet {

/// Everything a training run depends on besides the scenario files. The
/// single `seed` drives initialization, shuffling and the validation split.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  bool drop_out_of_map = false;

  std::uint64_t seed() const { return train.seed; }
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Layer order of the raster stack; configs may restate it but not change it.
std::vector<std::string> layer_order();

/// {"seed", "model": {...}, "train": {...}, "drop_out_of_map", "layer_order"}.
/// Missing keys keep their defaults; unknown top-level keys are rejected.
std::string run_config_json(const RunConfig& config);
RunConfig parse_run_config(std::string_view json);
RunConfig load_run_config(const std::filesystem::path& path);

/// Name of the first model field that differs, or empty when equal.
std::string first_mismatch(const ModelConfig& a, const ModelConfig& b);

}  // namespace capnet
