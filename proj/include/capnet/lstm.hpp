#pragma once

#include <cstddef>

#include "capnet/tensor.hpp"

namespace capnet::num {

/// Weights of one LSTM layer. Gate blocks along the 4H axis are ordered
/// input, forget, candidate, output.
struct LstmParams {
  LstmParams() = default;
  LstmParams(std::size_t input_size, std::size_t hidden_size, const std::string& prefix = "lstm");

  Parameter w_input;   // [I x 4H]
  Parameter w_hidden;  // [H x 4H]
  Parameter bias;      // [4H]

  std::size_t input_size() const { return w_input.shape.at(0); }
  std::size_t hidden_size() const { return w_hidden.shape.at(0); }
};

struct LstmWeights {
  Var w_input, w_hidden, bias;
};

LstmWeights bind(Tape& tape, LstmParams& params);
LstmWeights bind(Tape& tape, const LstmParams& params);  // gradients disabled

struct LstmState {
  Var h, c;
};

/// One recurrence step:
///   i,f,g,o = x.W_in + h.W_h + b split in four
///   c' = sigmoid(f) * c + sigmoid(i) * tanh(g)
///   h' = sigmoid(o) * tanh(c')
LstmState lstm_cell(Var x, Var h_prev, Var c_prev, const LstmWeights& w);

}  // namespace capnet::num
