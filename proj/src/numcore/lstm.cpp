#include "capnet/lstm.hpp"

#include "capnet/ops.hpp"

namespace capnet::num {

LstmParams::LstmParams(std::size_t input_size, std::size_t hidden_size, const std::string& prefix)
    : w_input(prefix + ".w_input", {input_size, 4 * hidden_size}),
      w_hidden(prefix + ".w_hidden", {hidden_size, 4 * hidden_size}),
      bias(prefix + ".bias", {4 * hidden_size}) {}

LstmWeights bind(Tape& tape, LstmParams& params) {
  return {tape.param(params.w_input), tape.param(params.w_hidden), tape.param(params.bias)};
}

LstmWeights bind(Tape& tape, const LstmParams& params) {
  return {tape.param(params.w_input), tape.param(params.w_hidden), tape.param(params.bias)};
}

LstmState lstm_cell(Var x, Var h_prev, Var c_prev, const LstmWeights& w) {
  const std::size_t hidden = w.w_hidden.dim(0);
  if (x.shape() != Shape{w.w_input.dim(0)}) {
    throw ShapeError("lstm_cell: input " + shape_string(x.shape()) + " does not match weight " +
                     shape_string(w.w_input.shape()));
  }
  if (h_prev.shape() != Shape{hidden} || c_prev.shape() != Shape{hidden}) {
    throw ShapeError("lstm_cell: state " + shape_string(h_prev.shape()) + "/" +
                     shape_string(c_prev.shape()) + " does not match hidden size " +
                     std::to_string(hidden));
  }
  Var gates = add(affine(x, w.w_input, w.bias), matvec(h_prev, w.w_hidden));
  Var in_gate = sigmoid(slice(gates, 0, 0, hidden));
  Var forget_gate = sigmoid(slice(gates, 0, hidden, hidden));
  Var candidate = tanh(slice(gates, 0, 2 * hidden, hidden));
  Var out_gate = sigmoid(slice(gates, 0, 3 * hidden, hidden));
  Var c = add(mul(forget_gate, c_prev), mul(in_gate, candidate));
  Var h = mul(out_gate, tanh(c));
  return {h, c};
}

}  // namespace capnet::num
