#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "capnet/encoder.hpp"
#include "capnet/lstm.hpp"
#include "capnet/samples.hpp"

namespace capnet {

struct ModelConfig {
  SampleConfig sample;
  CapsuleArch arch;
  std::size_t state_dim = 128;  // state encoder width
  std::size_t hidden = 128;     // LSTM hidden size

  /// Shrunken configuration for gradient checks: 16 px rasters, rho = tau = 2.
  static ModelConfig tiny();
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct PredictorParams {
  PredictorParams() = default;
  explicit PredictorParams(const ModelConfig& config);

  ModelConfig config;
  CapsEncoderParams caps;
  num::Parameter state_weight, state_bias;      // [5 x state_dim], [state_dim]
  num::LstmParams lstm;                          // input final_dim + state_dim
  num::Parameter decoder_weight, decoder_bias;  // [hidden x 2 tau], [2 tau]

  std::vector<num::Parameter*> parameters();
  std::vector<const num::Parameter*> parameters() const;
  std::size_t parameter_count() const;
  std::size_t backbone_count() const { return caps.parameter_count(); }

  void init(std::uint64_t seed);
};

struct PredictorWeights {
  CapsEncoderWeights caps;
  num::Var state_weight, state_bias;
  num::LstmWeights lstm;
  num::Var decoder_weight, decoder_bias;
};

PredictorWeights bind(num::Tape& tape, PredictorParams& params);
PredictorWeights bind(num::Tape& tape, const PredictorParams& params);  // gradients disabled
/// Tensors in PredictorParams::parameters() order.
PredictorWeights predictor_weights_from(const ModelConfig& config, std::span<const num::Var> vars);

/// ELU(s W + b) for one standardized state row.
num::Var encode_state(const PredictorWeights& w, num::Var state_row);

/// Runs the LSTM from a zero state over per-step [z_t, s_t] (oldest first)
/// and returns the last hidden state.
num::Var fuse_and_encode(const PredictorWeights& w, const std::vector<num::Var>& z_seq,
                         const std::vector<num::Var>& state_seq);

/// Affine map to 2 tau values read as tau rows of (dx, dy).
num::Var decode(const PredictorWeights& w, num::Var h, std::size_t tau);

/// Full forward pass for one sample; the encoder's cache is shared by every
/// sample forwarded through the same ChunkEncoder.
num::Var forward(const ModelConfig& config, const PredictorWeights& w, ChunkEncoder& encoder,
                 const Sample& sample);

/// Convenience inference call: returns tau x 2 displacements.
std::vector<float> predict(const PredictorParams& params, const Sample& sample);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  PredictorParams params;
  StandardizationStats stats;
  std::string training_summary = "{}";  // JSON object text
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// In-memory image, identical to the file contents.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// JSON helpers shared by the checkpoint and the CLI run configuration.
std::string model_config_json(const ModelConfig& config);
ModelConfig parse_model_config(std::string_view json);

}  // namespace capnet
