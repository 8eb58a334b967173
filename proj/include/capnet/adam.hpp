#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "capnet/tensor.hpp"

namespace capnet::num {

struct AdamState {
  std::uint64_t step_count = 0;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update of every parameter from its `grad` field.
/// Moment buffers are created on the first call and must keep matching the
/// parameter list afterwards.
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr);

}  // namespace capnet::num
