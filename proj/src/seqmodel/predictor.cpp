#include "capnet/predictor.hpp"

#include <cmath>

#include "capnet/ops.hpp"

namespace capnet {

using num::Parameter;
using num::Var;

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.sample.rho = 2;
  c.sample.tau = 2;
  c.sample.raster.out_px = 16;
  c.arch = CapsuleArch::tiny();
  c.state_dim = 8;
  c.hidden = 8;
  return c;
}

void ModelConfig::validate() const {
  sample.validate();
  arch.validate();
  if (arch.input_px != sample.raster.out_px) {
    throw std::invalid_argument("config: encoder input " + std::to_string(arch.input_px) +
                                " px does not match raster out_px " + std::to_string(sample.raster.out_px));
  }
  if (arch.layers != kLayerCount) {
    throw std::invalid_argument("config: encoder must have one higher capsule per semantic layer (" +
                                std::to_string(kLayerCount) + ")");
  }
  if (state_dim == 0 || hidden == 0) throw std::invalid_argument("config: state_dim and hidden must be positive");
}

PredictorParams::PredictorParams(const ModelConfig& c)
    : config(c),
      caps((c.validate(), c.arch)),
      state_weight("state.weight", {kStateFeatures, c.state_dim}),
      state_bias("state.bias", {c.state_dim}),
      lstm(c.arch.final_dim + c.state_dim, c.hidden, "lstm"),
      decoder_weight("decoder.weight", {c.hidden, 2 * c.sample.tau}),
      decoder_bias("decoder.bias", {2 * c.sample.tau}) {}

std::vector<Parameter*> PredictorParams::parameters() {
  std::vector<Parameter*> out = caps.parameters();
  out.insert(out.end(), {&state_weight, &state_bias, &lstm.w_input, &lstm.w_hidden, &lstm.bias,
                         &decoder_weight, &decoder_bias});
  return out;
}

std::vector<const Parameter*> PredictorParams::parameters() const {
  auto mut = const_cast<PredictorParams*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::size_t PredictorParams::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->size();
  return n;
}

void PredictorParams::init(std::uint64_t seed) {
  Rng rng(seed);
  caps.init_glorot(rng);
  auto glorot = [&](Parameter& p, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (float& v : p.value) v = static_cast<float>(rng.uniform(-limit, limit));
  };
  const std::size_t h = config.hidden;
  glorot(state_weight, kStateFeatures, config.state_dim);
  glorot(lstm.w_input, lstm.input_size(), 4 * h);
  glorot(lstm.w_hidden, h, 4 * h);
  glorot(decoder_weight, h, 2 * config.sample.tau);
  for (Parameter* p : {&state_bias, &lstm.bias, &decoder_bias}) std::fill(p->value.begin(), p->value.end(), 0.0f);
}

namespace {

template <class Params, class VarFor>
PredictorWeights bind_with(const ModelConfig& config, Params& params, VarFor&& var_for) {
  std::vector<Var> vars;
  for (auto* p : params.parameters()) vars.push_back(var_for(*p));
  return predictor_weights_from(config, vars);
}

}  // namespace

PredictorWeights predictor_weights_from(const ModelConfig& config, std::span<const Var> vars) {
  const std::size_t n_caps = 2 + 4 * config.arch.branches + config.arch.layers + 1;
  if (vars.size() != n_caps + 7) {
    throw std::invalid_argument("predictor_weights_from: expected " + std::to_string(n_caps + 7) +
                                " tensors, got " + std::to_string(vars.size()));
  }
  PredictorWeights w;
  w.caps = weights_from(config.arch, vars.first(n_caps));
  std::size_t k = n_caps;
  w.state_weight = vars[k++];
  w.state_bias = vars[k++];
  w.lstm.w_input = vars[k++];
  w.lstm.w_hidden = vars[k++];
  w.lstm.bias = vars[k++];
  w.decoder_weight = vars[k++];
  w.decoder_bias = vars[k++];
  return w;
}

PredictorWeights bind(num::Tape& tape, PredictorParams& params) {
  return bind_with(params.config, params, [&](Parameter& p) { return tape.param(p); });
}

PredictorWeights bind(num::Tape& tape, const PredictorParams& params) {
  return bind_with(params.config, params, [&](const Parameter& p) { return tape.param(p); });
}

Var encode_state(const PredictorWeights& w, Var state_row) {
  return num::elu(num::affine(state_row, w.state_weight, w.state_bias));
}

Var fuse_and_encode(const PredictorWeights& w, const std::vector<Var>& z_seq, const std::vector<Var>& state_seq) {
  if (z_seq.size() != state_seq.size() || z_seq.empty()) {
    throw num::ShapeError("fuse_and_encode: " + std::to_string(z_seq.size()) + " map encodings vs " +
                          std::to_string(state_seq.size()) + " state encodings");
  }
  num::Tape& tape = *z_seq.front().tape();
  const std::size_t h = w.lstm.w_hidden.dim(0);
  num::LstmState s{tape.constant({h}, std::vector<float>(h, 0.0f)), tape.constant({h}, std::vector<float>(h, 0.0f))};
  for (std::size_t k = 0; k < z_seq.size(); ++k) {
    s = num::lstm_cell(num::concat({z_seq[k], state_seq[k]}, 0), s.h, s.c, w.lstm);
  }
  return s.h;
}

Var decode(const PredictorWeights& w, Var h, std::size_t tau) {
  Var out = num::affine(h, w.decoder_weight, w.decoder_bias);
  if (out.size() != 2 * tau) {
    throw num::ShapeError("decode: decoder emits " + std::to_string(out.size()) + " values, tau " +
                          std::to_string(tau) + " needs " + std::to_string(2 * tau));
  }
  return num::reshape(out, {tau, 2});
}

Var forward(const ModelConfig& config, const PredictorWeights& w, ChunkEncoder& encoder, const Sample& sample) {
  const std::size_t rho = config.sample.rho, tau = config.sample.tau;
  if (sample.observed.size() != rho || sample.state.size() != rho * kStateFeatures) {
    throw std::invalid_argument("sample has " + std::to_string(sample.observed.size()) +
                                " observed steps but the model expects rho = " + std::to_string(rho));
  }
  if (sample.target.size() != 2 * tau) {
    throw std::invalid_argument("sample has " + std::to_string(sample.target.size() / 2) +
                                " target steps but the model expects tau = " + std::to_string(tau));
  }
  num::Tape& tape = *w.state_weight.tape();
  std::vector<Var> z_seq, s_seq;
  for (std::size_t k = 0; k < rho; ++k) {
    z_seq.push_back(encoder.encode(sample.chunk(k, config.sample.raster)).z);
    const auto row = std::span<const float>(sample.state).subspan(k * kStateFeatures, kStateFeatures);
    s_seq.push_back(encode_state(w, tape.constant({kStateFeatures}, std::vector<float>(row.begin(), row.end()))));
  }
  return decode(w, fuse_and_encode(w, z_seq, s_seq), tau);
}

std::vector<float> predict(const PredictorParams& params, const Sample& sample) {
  num::Tape tape;
  tape.set_grad_enabled(false);
  const PredictorWeights w = bind(tape, params);
  ChunkEncoder enc(tape, w.caps);
  Var y = forward(params.config, w, enc, sample);
  return {y.value().begin(), y.value().end()};
}

}  // namespace capnet
