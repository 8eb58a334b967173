#include "capnet/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace capnet::num {

void adam_step(std::span<Parameter* const> params, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (state.first_moment.empty() && state.step_count == 0) {
    for (const Parameter* p : params) {
      state.first_moment.emplace_back(p->size(), 0.0f);
      state.second_moment.emplace_back(p->size(), 0.0f);
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != p.size() || v.size() != p.size() || p.grad.size() != p.size()) {
      throw ShapeError("adam_step: moment buffers do not match parameter " + p.name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + state.epsilon);
      p.value[i] = static_cast<float>(p.value[i] - update);
    }
  }
}

}  // namespace capnet::num
