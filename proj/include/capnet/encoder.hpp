#pragma once

// Capsule encoder for one chunk stack: a shared convolutional base, shared
// lower capsules built from parallel conv branches, one higher capsule per
// semantic layer and a final capsule over their concatenation.

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "capnet/raster.hpp"
#include "capnet/rng.hpp"
#include "capnet/tensor.hpp"

namespace capnet {

struct CapsuleArch {
  std::size_t input_px = 64;
  std::size_t base_kernel = 9, base_stride = 2, base_channels = 64;
  std::size_t branch_kernel = 9, branch_stride = 2, branch_channels = 32;
  std::size_t capsule_kernel = 2, capsule_stride = 2, capsule_channels = 16;
  std::size_t branches = 4;  // lower capsule dimension
  std::size_t layers = kLayerCount;
  std::size_t higher_dim = 32;
  std::size_t final_dim = 128;
  std::size_t routing_iterations = 3;

  std::size_t base_grid() const;      // 28 for the default
  std::size_t branch_grid() const;    // 10
  std::size_t capsule_grid() const;   // 5
  std::size_t lower_capsules() const; // 400
  /// Throws std::invalid_argument when a stage would have no output.
  void validate() const;

  /// Shrunken clone (16x16 input) used for end-to-end gradient checks.
  static CapsuleArch tiny();

  friend bool operator==(const CapsuleArch&, const CapsuleArch&) = default;
};

struct CapsEncoderParams {
  CapsEncoderParams() = default;
  explicit CapsEncoderParams(const CapsuleArch& arch);

  CapsuleArch arch;
  num::Parameter base_kernel, base_bias;
  std::vector<num::Parameter> branch_kernel, branch_bias;    // per branch
  std::vector<num::Parameter> capsule_kernel, capsule_bias;  // per branch
  std::vector<num::Parameter> higher;                        // per layer [N x B x higher_dim]
  num::Parameter final_transform;                            // [layers x higher_dim x final_dim]

  std::vector<num::Parameter*> parameters();
  std::vector<const num::Parameter*> parameters() const;
  std::size_t parameter_count() const;

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) per tensor, biases zero.
  void init_glorot(Rng& rng);
};

/// Parameters bound to one tape. The branch kernels are fused into a single
/// convolution whose output channels are then split per branch.
struct CapsEncoderWeights {
  CapsuleArch arch;
  num::Var base_kernel, base_bias;
  num::Var branch_kernel, branch_bias;  // fused over branches
  std::vector<num::Var> capsule_kernel, capsule_bias;
  std::vector<num::Var> higher;
  num::Var final_transform;
};

CapsEncoderWeights bind(num::Tape& tape, CapsEncoderParams& params);
CapsEncoderWeights bind(num::Tape& tape, const CapsEncoderParams& params);  // gradients disabled
/// Assembles weights from tensors given in CapsEncoderParams::parameters() order.
CapsEncoderWeights weights_from(const CapsuleArch& arch, std::span<const num::Var> vars);

/// conv(k9, s2, 64) + ELU on one raster given as [H x W x 1].
num::Var conv_base(const CapsEncoderWeights& w, num::Var raster);

/// Four conv(k9, s2, 32) -> conv(k2, s2, 16) branches; capsule i collects the
/// i-th scalar of every branch in (channel, row, column) order. Squashed.
num::Var lower_capsules(const CapsEncoderWeights& w, num::Var features);

/// Routing by agreement. `predictions` is [N_in x N_out x D]; returns
/// [N_out x D]. Coupling logits are recomputed from zero on every call and
/// treated as constants by the gradient.
num::Var dynamic_routing(num::Var predictions, std::size_t iterations);

/// Coupling coefficients c[i * N_out + j] used by the final routing iteration.
std::vector<float> routing_coupling(std::span<const float> predictions, std::size_t n_in,
                                    std::size_t n_out, std::size_t dim, std::size_t iterations);

num::Var higher_capsule(const CapsEncoderWeights& w, std::size_t layer, num::Var capsules);
num::Var final_capsule(const CapsEncoderWeights& w, const std::vector<num::Var>& per_layer);

struct EncodedChunk {
  num::Var z;                       // [final_dim]
  std::vector<num::Var> per_layer;  // layers x [higher_dim]
  std::vector<float> capsule_norms; // per-layer norms, then the final norm
};

/// Encodes chunk stacks on one tape. Identical rasters (for example empty
/// layers, or the same time step shared by overlapping windows) are encoded
/// once and their outputs reused, so gradients flow through a single copy.
class ChunkEncoder {
 public:
  ChunkEncoder(num::Tape& tape, const CapsEncoderWeights& weights);

  EncodedChunk encode(const ChunkStack& stack);
  std::size_t cache_hits() const { return hits_; }

 private:
  num::Var lower_for(std::span<const float> channel);

  template <class V>
  struct Entry {
    std::vector<float> key;
    V value;
  };

  num::Tape& tape_;
  const CapsEncoderWeights& w_;
  std::unordered_map<std::uint64_t, std::vector<Entry<num::Var>>> lower_;
  std::unordered_map<std::uint64_t, std::vector<Entry<EncodedChunk>>> stacks_;
  std::size_t hits_ = 0;
};

EncodedChunk encode_chunk(num::Tape& tape, const CapsEncoderWeights& weights, const ChunkStack& stack);

}  // namespace capnet
