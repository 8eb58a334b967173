#include <algorithm>
#include <cmath>

#include "capnet/encoder.hpp"
#include "capnet/ops.hpp"

namespace capnet {

std::vector<float> routing_coupling(std::span<const float> u, std::size_t n_in, std::size_t n_out,
                                    std::size_t dim, std::size_t iterations) {
  if (iterations == 0) throw std::invalid_argument("routing needs at least one iteration");
  if (u.size() != n_in * n_out * dim) throw num::ShapeError("routing_coupling: prediction size mismatch");
  std::vector<double> b(n_in * n_out, 0.0);
  std::vector<float> c(n_in * n_out);
  std::vector<double> s(n_out * dim), v(n_out * dim);
  for (std::size_t it = 0;; ++it) {
    for (std::size_t i = 0; i < n_in; ++i) {
      const double* bi = b.data() + i * n_out;
      const double mx = *std::max_element(bi, bi + n_out);
      double z = 0.0;
      for (std::size_t j = 0; j < n_out; ++j) z += std::exp(bi[j] - mx);
      for (std::size_t j = 0; j < n_out; ++j) c[i * n_out + j] = static_cast<float>(std::exp(bi[j] - mx) / z);
    }
    if (it + 1 == iterations) return c;
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t i = 0; i < n_in; ++i) {
      for (std::size_t j = 0; j < n_out; ++j) {
        const double cij = c[i * n_out + j];
        const float* uij = u.data() + (i * n_out + j) * dim;
        for (std::size_t d = 0; d < dim; ++d) s[j * dim + d] += cij * uij[d];
      }
    }
    for (std::size_t j = 0; j < n_out; ++j) {
      double n2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) n2 += s[j * dim + d] * s[j * dim + d];
      const double n = std::sqrt(n2);
      const double k = n2 / (1.0 + n2) / (n + 1e-7);
      for (std::size_t d = 0; d < dim; ++d) v[j * dim + d] = k * s[j * dim + d];
    }
    for (std::size_t i = 0; i < n_in; ++i) {
      for (std::size_t j = 0; j < n_out; ++j) {
        const float* uij = u.data() + (i * n_out + j) * dim;
        double agree = 0.0;
        for (std::size_t d = 0; d < dim; ++d) agree += uij[d] * v[j * dim + d];
        b[i * n_out + j] += agree;
      }
    }
  }
}

num::Var dynamic_routing(num::Var predictions, std::size_t iterations) {
  const num::Shape& s = predictions.shape();
  if (s.size() != 3) {
    throw num::ShapeError("dynamic_routing expects [N_in x N_out x D], got " + num::shape_string(s));
  }
  auto c = routing_coupling(predictions.value(), s[0], s[1], s[2], iterations);
  return num::squash(num::routing_sum(predictions, c));
}

}  // namespace capnet
