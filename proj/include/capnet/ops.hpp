#pragma once

// Differentiable operators over tape Vars. All ops validate shapes and throw
// ShapeError on mismatch. Reductions accumulate in double.

#include <cstddef>
#include <vector>

#include "capnet/tensor.hpp"

namespace capnet::num {

// Elementwise arithmetic (identical shapes).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, float factor);

Var abs(Var x);     // subgradient 0 at 0
Var square(Var x);
Var sum(Var x);     // -> scalar
Var mean(Var x);    // -> scalar

Var elu(Var x);     // alpha = 1
Var sigmoid(Var x);
Var tanh(Var x);

/// Capsule squashing along the last axis:
/// |v|^2 / (1 + |v|^2) * v / (|v| + epsilon).
Var squash(Var v, float epsilon = 1e-7f);

/// Numerically stable softmax along `axis`.
Var softmax(Var x, std::size_t axis);

/// x[N] . weight[NxM] -> [M]
Var matvec(Var x, Var weight);
/// x[N] . weight[NxM] + bias[M] -> [M]
Var affine(Var x, Var weight, Var bias);
/// Adds bias[C] to every length-C row along the last axis of x.
Var bias_add(Var x, Var bias);

/// Valid (zero-padding) 2-D convolution over HWC input with kernels laid out
/// [k x k x Cin x Cout]. Output spatial size is (H - k) / stride + 1.
Var conv2d(Var input, Var kernels, std::size_t stride);

Var reshape(Var x, Shape shape);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t length);

/// Interleaves B branch outputs (each an HxWxC map with N = H*W*C scalars)
/// into an [N x B] capsule matrix. Row i collects scalar i of every branch,
/// where scalars are enumerated channel-major, then row, then column.
Var capsule_stack(const std::vector<Var>& branches);

/// Per-capsule linear transform: u[N x Din], weight[N x Din x M] -> [N x M],
/// row n = u[n] . weight[n].
Var capsule_predict(Var u, Var weight);

/// s[j] = sum_i coupling[i][j] * predictions[i][j] for predictions
/// [Nin x Nout x D] and a constant coupling matrix [Nin x Nout].
Var routing_sum(Var predictions, const std::vector<float>& coupling);

}  // namespace capnet::num
