#include "capnet/encoder.hpp"

#include <cmath>
#include <cstring>

#include "capnet/ops.hpp"

namespace capnet {

using num::Parameter;
using num::Shape;
using num::Var;

namespace {

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride) {
  return in < k || stride == 0 ? 0 : (in - k) / stride + 1;
}

std::uint64_t fnv1a(std::span<const float> values) {
  std::uint64_t h = 1469598103934665603ull;
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    for (int b = 0; b < 4; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

void glorot(Parameter& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (float& v : p.value) v = static_cast<float>(rng.uniform(-limit, limit));
}

float norm(Var v) {
  double s = 0.0;
  for (float x : v.value()) s += static_cast<double>(x) * x;
  return static_cast<float>(std::sqrt(s));
}

}  // namespace

std::size_t CapsuleArch::base_grid() const { return conv_out(input_px, base_kernel, base_stride); }
std::size_t CapsuleArch::branch_grid() const { return conv_out(base_grid(), branch_kernel, branch_stride); }
std::size_t CapsuleArch::capsule_grid() const {
  return conv_out(branch_grid(), capsule_kernel, capsule_stride);
}
std::size_t CapsuleArch::lower_capsules() const {
  return capsule_grid() * capsule_grid() * capsule_channels;
}

void CapsuleArch::validate() const {
  if (capsule_grid() == 0) {
    throw std::invalid_argument("capsule architecture: kernels and strides leave no output for a " +
                                std::to_string(input_px) + " px input");
  }
  if (base_channels == 0 || branch_channels == 0 || capsule_channels == 0 || branches == 0 ||
      layers == 0 || higher_dim == 0 || final_dim == 0) {
    throw std::invalid_argument("capsule architecture: every width must be positive");
  }
  if (routing_iterations == 0) throw std::invalid_argument("routing needs at least one iteration");
}

CapsuleArch CapsuleArch::tiny() {
  CapsuleArch a;
  a.input_px = 16;
  a.base_kernel = 3, a.base_stride = 1, a.base_channels = 4;
  a.branch_kernel = 3, a.branch_stride = 2, a.branch_channels = 4;
  a.capsule_kernel = 2, a.capsule_stride = 2, a.capsule_channels = 2;
  a.higher_dim = 8;
  a.final_dim = 16;
  return a;
}

CapsEncoderParams::CapsEncoderParams(const CapsuleArch& a) : arch(a) {
  a.validate();
  base_kernel = Parameter("caps.base.kernel", {a.base_kernel, a.base_kernel, 1, a.base_channels});
  base_bias = Parameter("caps.base.bias", {a.base_channels});
  for (std::size_t b = 0; b < a.branches; ++b) {
    const std::string pre = "caps.branch" + std::to_string(b);
    branch_kernel.emplace_back(pre + ".conv1.kernel",
                               Shape{a.branch_kernel, a.branch_kernel, a.base_channels, a.branch_channels});
    branch_bias.emplace_back(pre + ".conv1.bias", Shape{a.branch_channels});
    capsule_kernel.emplace_back(pre + ".conv2.kernel",
                                Shape{a.capsule_kernel, a.capsule_kernel, a.branch_channels, a.capsule_channels});
    capsule_bias.emplace_back(pre + ".conv2.bias", Shape{a.capsule_channels});
  }
  for (std::size_t l = 0; l < a.layers; ++l) {
    higher.emplace_back("caps.higher" + std::to_string(l) + ".transform",
                        Shape{a.lower_capsules(), a.branches, a.higher_dim});
  }
  final_transform = Parameter("caps.final.transform", {a.layers, a.higher_dim, a.final_dim});
}

std::vector<Parameter*> CapsEncoderParams::parameters() {
  std::vector<Parameter*> out{&base_kernel, &base_bias};
  for (std::size_t b = 0; b < branch_kernel.size(); ++b) {
    out.insert(out.end(), {&branch_kernel[b], &branch_bias[b], &capsule_kernel[b], &capsule_bias[b]});
  }
  for (auto& h : higher) out.push_back(&h);
  out.push_back(&final_transform);
  return out;
}

std::vector<const Parameter*> CapsEncoderParams::parameters() const {
  auto mut = const_cast<CapsEncoderParams*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::size_t CapsEncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->size();
  return n;
}

void CapsEncoderParams::init_glorot(Rng& rng) {
  const CapsuleArch& a = arch;
  glorot(base_kernel, a.base_kernel * a.base_kernel, a.base_kernel * a.base_kernel * a.base_channels, rng);
  for (std::size_t b = 0; b < a.branches; ++b) {
    const std::size_t k2 = a.branch_kernel * a.branch_kernel;
    glorot(branch_kernel[b], k2 * a.base_channels, k2 * a.branch_channels, rng);
    const std::size_t c2 = a.capsule_kernel * a.capsule_kernel;
    glorot(capsule_kernel[b], c2 * a.branch_channels, c2 * a.capsule_channels, rng);
  }
  // Every input capsule component feeds the single parent, so fan-in counts them all.
  for (auto& h : higher) glorot(h, a.lower_capsules() * a.branches, a.higher_dim, rng);
  glorot(final_transform, a.layers * a.higher_dim, a.final_dim, rng);
  for (Parameter* p : {&base_bias}) std::fill(p->value.begin(), p->value.end(), 0.0f);
  for (auto* group : {&branch_bias, &capsule_bias}) {
    for (Parameter& p : *group) std::fill(p.value.begin(), p.value.end(), 0.0f);
  }
}

CapsEncoderWeights weights_from(const CapsuleArch& arch, std::span<const Var> vars) {
  const std::size_t expected = 2 + 4 * arch.branches + arch.layers + 1;
  if (vars.size() != expected) {
    throw std::invalid_argument("weights_from: expected " + std::to_string(expected) + " tensors, got " +
                                std::to_string(vars.size()));
  }
  CapsEncoderWeights w;
  w.arch = arch;
  std::size_t k = 0;
  w.base_kernel = vars[k++];
  w.base_bias = vars[k++];
  std::vector<Var> kernels, biases;
  for (std::size_t b = 0; b < arch.branches; ++b) {
    kernels.push_back(vars[k++]);
    biases.push_back(vars[k++]);
    w.capsule_kernel.push_back(vars[k++]);
    w.capsule_bias.push_back(vars[k++]);
  }
  w.branch_kernel = num::concat(kernels, 3);
  w.branch_bias = num::concat(biases, 0);
  for (std::size_t l = 0; l < arch.layers; ++l) w.higher.push_back(vars[k++]);
  w.final_transform = vars[k++];
  return w;
}

CapsEncoderWeights bind(num::Tape& tape, CapsEncoderParams& params) {
  std::vector<Var> vars;
  for (Parameter* p : params.parameters()) vars.push_back(tape.param(*p));
  return weights_from(params.arch, vars);
}

CapsEncoderWeights bind(num::Tape& tape, const CapsEncoderParams& params) {
  std::vector<Var> vars;
  for (const Parameter* p : params.parameters()) vars.push_back(tape.param(*p));
  return weights_from(params.arch, vars);
}

Var conv_base(const CapsEncoderWeights& w, Var raster) {
  const Shape expect{w.arch.input_px, w.arch.input_px, 1};
  if (raster.shape() != expect) {
    throw num::ShapeError("conv_base expects " + num::shape_string(expect) + ", got " +
                          num::shape_string(raster.shape()));
  }
  return num::elu(num::bias_add(num::conv2d(raster, w.base_kernel, w.arch.base_stride), w.base_bias));
}

Var lower_capsules(const CapsEncoderWeights& w, Var features) {
  const CapsuleArch& a = w.arch;
  Var fused = num::bias_add(num::conv2d(features, w.branch_kernel, a.branch_stride), w.branch_bias);
  std::vector<Var> branches;
  for (std::size_t b = 0; b < a.branches; ++b) {
    Var part = num::slice(fused, 2, b * a.branch_channels, a.branch_channels);
    branches.push_back(
        num::bias_add(num::conv2d(part, w.capsule_kernel[b], a.capsule_stride), w.capsule_bias[b]));
  }
  return num::squash(num::capsule_stack(branches));
}

Var higher_capsule(const CapsEncoderWeights& w, std::size_t layer, Var capsules) {
  if (layer >= w.higher.size()) throw std::out_of_range("higher_capsule: layer index out of range");
  const CapsuleArch& a = w.arch;
  Var pred = num::capsule_predict(capsules, w.higher[layer]);
  Var routed = dynamic_routing(num::reshape(pred, {a.lower_capsules(), 1, a.higher_dim}), a.routing_iterations);
  return num::reshape(routed, {a.higher_dim});
}

Var final_capsule(const CapsEncoderWeights& w, const std::vector<Var>& per_layer) {
  const CapsuleArch& a = w.arch;
  if (per_layer.size() != a.layers) {
    throw num::ShapeError("final_capsule expects " + std::to_string(a.layers) + " layer vectors");
  }
  Var u = num::reshape(num::concat(per_layer, 0), {a.layers, a.higher_dim});
  Var pred = num::capsule_predict(u, w.final_transform);
  Var routed = dynamic_routing(num::reshape(pred, {a.layers, 1, a.final_dim}), a.routing_iterations);
  return num::reshape(routed, {a.final_dim});
}

ChunkEncoder::ChunkEncoder(num::Tape& tape, const CapsEncoderWeights& weights) : tape_(tape), w_(weights) {}

Var ChunkEncoder::lower_for(std::span<const float> channel) {
  auto& bucket = lower_[fnv1a(channel)];
  for (const auto& e : bucket) {
    if (std::equal(e.key.begin(), e.key.end(), channel.begin(), channel.end())) {
      ++hits_;
      return e.value;
    }
  }
  const std::size_t n = w_.arch.input_px;
  Var raster = tape_.constant({n, n, 1}, std::vector<float>(channel.begin(), channel.end()));
  Var caps = lower_capsules(w_, conv_base(w_, raster));
  bucket.push_back({std::vector<float>(channel.begin(), channel.end()), caps});
  return caps;
}

EncodedChunk ChunkEncoder::encode(const ChunkStack& stack) {
  const CapsuleArch& a = w_.arch;
  if (stack.side != a.input_px || stack.layers.size() != a.layers * a.input_px * a.input_px) {
    throw num::ShapeError("chunk stack of side " + std::to_string(stack.side) + " does not match the " +
                          std::to_string(a.input_px) + " px encoder input");
  }
  auto& bucket = stacks_[fnv1a(stack.layers)];
  for (const auto& e : bucket) {
    if (e.key == stack.layers) {
      ++hits_;
      return e.value;
    }
  }
  EncodedChunk out;
  for (std::size_t l = 0; l < a.layers; ++l) {
    out.per_layer.push_back(higher_capsule(w_, l, lower_for(stack.channel(l))));
    out.capsule_norms.push_back(norm(out.per_layer.back()));
  }
  out.z = final_capsule(w_, out.per_layer);
  out.capsule_norms.push_back(norm(out.z));
  bucket.push_back({stack.layers, out});
  return out;
}

EncodedChunk encode_chunk(num::Tape& tape, const CapsEncoderWeights& weights, const ChunkStack& stack) {
  ChunkEncoder enc(tape, weights);
  return enc.encode(stack);
}

}  // namespace capnet
