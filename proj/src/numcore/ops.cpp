#include "capnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace capnet::num {
namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

// Elementwise op; `bwd(x, y)` is dy/dx given input x and output y.
template <typename F, typename D>
Var elementwise(Var x, F fwd, D bwd) {
  auto xv = x.value();
  std::vector<float> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  std::vector<float> saved = out;
  const std::size_t xid = x.id();
  return x.tape()->record(
      x.shape(), std::move(out), {x},
      [xid, bwd, saved = std::move(saved)](Tape& t, std::span<const float> g) {
        auto xv = t.value(xid);
        auto gx = t.grad_buffer(xid);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * bwd(xv[i], saved[i]);
      });
}

}  // namespace

Var abs(Var x) {
  return elementwise(
      x, [](float v) { return std::fabs(v); },
      [](float v, float) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
}

Var square(Var x) {
  return elementwise(x, [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Var elu(Var x) {
  return elementwise(
      x, [](float v) { return v > 0.0f ? v : std::expm1(v); },
      [](float v, float y) { return v > 0.0f ? 1.0f : y + 1.0f; });
}

Var sigmoid(Var x) {
  return elementwise(
      x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); },
      [](float, float y) { return y * (1.0f - y); });
}

Var tanh(Var x) {
  return elementwise(
      x, [](float v) { return std::tanh(v); }, [](float, float y) { return 1.0f - y * y; });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  auto av = a.value();
  auto bv = b.value();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape()->record(a.shape(), std::move(out), {a, b},
                          [aid, bid](Tape& t, std::span<const float> g) {
                            for (std::size_t id : {aid, bid}) {
                              if (!t.requires_grad(id)) continue;
                              auto d = t.grad_buffer(id);
                              for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                            }
                          });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  auto av = a.value();
  auto bv = b.value();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape()->record(a.shape(), std::move(out), {a, b},
                          [aid, bid](Tape& t, std::span<const float> g) {
                            if (t.requires_grad(aid)) {
                              auto d = t.grad_buffer(aid);
                              for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                            }
                            if (t.requires_grad(bid)) {
                              auto d = t.grad_buffer(bid);
                              for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
                            }
                          });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  auto av = a.value();
  auto bv = b.value();
  std::vector<float> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return a.tape()->record(a.shape(), std::move(out), {a, b},
                          [aid, bid](Tape& t, std::span<const float> g) {
                            auto av = t.value(aid);
                            auto bv = t.value(bid);
                            if (t.requires_grad(aid)) {
                              auto d = t.grad_buffer(aid);
                              for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
                            }
                            if (t.requires_grad(bid)) {
                              auto d = t.grad_buffer(bid);
                              for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
                            }
                          });
}

Var scale(Var x, float factor) {
  auto xv = x.value();
  std::vector<float> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
  const std::size_t xid = x.id();
  return x.tape()->record(x.shape(), std::move(out), {x},
                          [xid, factor](Tape& t, std::span<const float> g) {
                            auto d = t.grad_buffer(xid);
                            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * factor;
                          });
}

Var sum(Var x) {
  double acc = 0.0;
  for (float v : x.value()) acc += v;
  const std::size_t xid = x.id();
  return x.tape()->record({1}, {static_cast<float>(acc)}, {x},
                          [xid](Tape& t, std::span<const float> g) {
                            auto d = t.grad_buffer(xid);
                            for (float& v : d) v += g[0];
                          });
}

Var mean(Var x) {
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  double acc = 0.0;
  for (float v : x.value()) acc += v;
  const std::size_t xid = x.id();
  const float inv = 1.0f / static_cast<float>(n);
  return x.tape()->record({1}, {static_cast<float>(acc / static_cast<double>(n))}, {x},
                          [xid, inv](Tape& t, std::span<const float> g) {
                            auto d = t.grad_buffer(xid);
                            for (float& v : d) v += g[0] * inv;
                          });
}

Var squash(Var v, float epsilon) {
  if (v.shape().empty()) throw ShapeError("squash needs at least one axis");
  const std::size_t dim = v.shape().back();
  const std::size_t count = v.size() / dim;
  auto in = v.value();
  std::vector<float> out(in.size());
  for (std::size_t c = 0; c < count; ++c) {
    const float* x = in.data() + c * dim;
    double n2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) n2 += static_cast<double>(x[d]) * x[d];
    const double n = std::sqrt(n2);
    const double g = n2 / ((1.0 + n2) * (n + epsilon));
    for (std::size_t d = 0; d < dim; ++d) out[c * dim + d] = static_cast<float>(g * x[d]);
  }
  const std::size_t vid = v.id();
  const double eps = epsilon;
  return v.tape()->record(
      v.shape(), std::move(out), {v}, [vid, dim, count, eps](Tape& t, std::span<const float> gout) {
        auto in = t.value(vid);
        auto gin = t.grad_buffer(vid);
        for (std::size_t c = 0; c < count; ++c) {
          const float* x = in.data() + c * dim;
          const float* go = gout.data() + c * dim;
          double n2 = 0.0, dot = 0.0;
          for (std::size_t d = 0; d < dim; ++d) {
            n2 += static_cast<double>(x[d]) * x[d];
            dot += static_cast<double>(x[d]) * go[d];
          }
          const double n = std::sqrt(n2);
          const double den = (1.0 + n2) * (n + eps);
          const double g = n2 / den;
          // out = g(n) * x, so dx = g * dout + (g'(n) / n) * (x . dout) * x.
          double radial = 0.0;
          if (n > 0.0) {
            const double dg = (2.0 * n * den - n2 * (2.0 * n * (n + eps) + (1.0 + n2))) / (den * den);
            radial = dg / n * dot;
          }
          for (std::size_t d = 0; d < dim; ++d) {
            gin[c * dim + d] += static_cast<float>(g * go[d] + radial * x[d]);
          }
        }
      });
}

Var softmax(Var x, std::size_t axis) {
  const Shape& shape = x.shape();
  if (axis >= shape.size()) {
    throw ShapeError("softmax axis " + std::to_string(axis) + " out of range for " +
                     shape_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  auto in = x.value();
  std::vector<float> out(in.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < inner; ++k) {
      const std::size_t base = o * len * inner + k;
      float mx = in[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, in[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < len; ++j) z += std::exp(static_cast<double>(in[base + j * inner]) - mx);
      for (std::size_t j = 0; j < len; ++j) {
        out[base + j * inner] =
            static_cast<float>(std::exp(static_cast<double>(in[base + j * inner]) - mx) / z);
      }
    }
  }
  std::vector<float> saved = out;
  const std::size_t xid = x.id();
  return x.tape()->record(
      shape, std::move(out), {x},
      [xid, outer, inner, len, saved = std::move(saved)](Tape& t, std::span<const float> g) {
        auto d = t.grad_buffer(xid);
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t k = 0; k < inner; ++k) {
            const std::size_t base = o * len * inner + k;
            double dot = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
              dot += static_cast<double>(saved[base + j * inner]) * g[base + j * inner];
            }
            for (std::size_t j = 0; j < len; ++j) {
              const std::size_t i = base + j * inner;
              d[i] += static_cast<float>(saved[i] * (g[i] - dot));
            }
          }
        }
      });
}

Var matvec(Var x, Var weight) {
  if (x.shape().size() != 1 || weight.shape().size() != 2 || weight.dim(0) != x.dim(0)) {
    throw ShapeError("matvec: cannot multiply " + shape_string(x.shape()) + " by " +
                     shape_string(weight.shape()));
  }
  const std::size_t n = weight.dim(0), m = weight.dim(1);
  auto xv = x.value();
  auto wv = weight.value();
  std::vector<double> acc(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = xv[i];
    const float* row = wv.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) acc[j] += xi * row[j];
  }
  std::vector<float> out(acc.begin(), acc.end());
  const std::size_t xid = x.id(), wid = weight.id();
  return x.tape()->record({m}, std::move(out), {x, weight},
                          [xid, wid, n, m](Tape& t, std::span<const float> g) {
                            auto xv = t.value(xid);
                            auto wv = t.value(wid);
                            if (t.requires_grad(xid)) {
                              auto dx = t.grad_buffer(xid);
                              for (std::size_t i = 0; i < n; ++i) {
                                const float* row = wv.data() + i * m;
                                double a = 0.0;
                                for (std::size_t j = 0; j < m; ++j) a += static_cast<double>(row[j]) * g[j];
                                dx[i] += static_cast<float>(a);
                              }
                            }
                            if (t.requires_grad(wid)) {
                              auto dw = t.grad_buffer(wid);
                              for (std::size_t i = 0; i < n; ++i) {
                                const float xi = xv[i];
                                float* row = dw.data() + i * m;
                                for (std::size_t j = 0; j < m; ++j) row[j] += xi * g[j];
                              }
                            }
                          });
}

Var bias_add(Var x, Var bias) {
  if (bias.shape().size() != 1 || x.shape().empty() || x.shape().back() != bias.dim(0)) {
    throw ShapeError("bias_add: bias " + shape_string(bias.shape()) +
                     " does not match last axis of " + shape_string(x.shape()));
  }
  const std::size_t c = bias.dim(0);
  auto xv = x.value();
  auto bv = bias.value();
  std::vector<float> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[i % c];
  const std::size_t xid = x.id(), bid = bias.id();
  return x.tape()->record(x.shape(), std::move(out), {x, bias},
                          [xid, bid, c](Tape& t, std::span<const float> g) {
                            if (t.requires_grad(xid)) {
                              auto d = t.grad_buffer(xid);
                              for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                            }
                            if (t.requires_grad(bid)) {
                              std::vector<double> acc(c, 0.0);
                              for (std::size_t i = 0; i < g.size(); ++i) acc[i % c] += g[i];
                              auto d = t.grad_buffer(bid);
                              for (std::size_t j = 0; j < c; ++j) d[j] += static_cast<float>(acc[j]);
                            }
                          });
}

Var affine(Var x, Var weight, Var bias) {
  if (bias.shape().size() != 1 || weight.shape().size() != 2 || bias.dim(0) != weight.dim(1)) {
    throw ShapeError("affine: bias " + shape_string(bias.shape()) + " does not match weight " +
                     shape_string(weight.shape()));
  }
  return bias_add(matvec(x, weight), bias);
}

Var reshape(Var x, Shape shape) {
  if (element_count(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                     shape_string(shape));
  }
  auto xv = x.value();
  const std::size_t xid = x.id();
  return x.tape()->record(std::move(shape), std::vector<float>(xv.begin(), xv.end()), {x},
                          [xid](Tape& t, std::span<const float> g) {
                            auto d = t.grad_buffer(xid);
                            for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                          });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat axis out of range for " + shape_string(first));
  std::size_t outer = 1, inner = 1, total = 0;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> lens;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw ShapeError("concat: " + shape_string(s) + " incompatible with " +
                       shape_string(first) + " along axis " + std::to_string(axis));
    }
    lens.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  std::vector<float> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto v = parts[p].value();
    const std::size_t chunk = lens[p] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data() + o * chunk, chunk, out.data() + o * total * inner + offset * inner);
    }
    offset += lens[p];
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return parts.front().tape()->record(
      std::move(out_shape), std::move(out), parts,
      [ids, lens, outer, inner, total](Tape& t, std::span<const float> g) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
          const std::size_t chunk = lens[p] * inner;
          if (t.requires_grad(ids[p])) {
            auto d = t.grad_buffer(ids[p]);
            for (std::size_t o = 0; o < outer; ++o) {
              const float* src = g.data() + o * total * inner + offset * inner;
              float* dst = d.data() + o * chunk;
              for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
            }
          }
          offset += lens[p];
        }
      });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t length) {
  const Shape& shape = x.shape();
  if (axis >= shape.size() || length == 0 || begin + length > shape[axis]) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + length) +
                     ") out of range on axis " + std::to_string(axis) + " of " +
                     shape_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  Shape out_shape = shape;
  out_shape[axis] = length;
  auto xv = x.value();
  std::vector<float> out(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.data() + (o * len + begin) * inner, length * inner,
                out.data() + o * length * inner);
  }
  const std::size_t xid = x.id();
  return x.tape()->record(std::move(out_shape), std::move(out), {x},
                          [xid, outer, inner, len, begin, length](Tape& t, std::span<const float> g) {
                            auto d = t.grad_buffer(xid);
                            for (std::size_t o = 0; o < outer; ++o) {
                              float* dst = d.data() + (o * len + begin) * inner;
                              const float* src = g.data() + o * length * inner;
                              for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
                            }
                          });
}

Var capsule_stack(const std::vector<Var>& branches) {
  if (branches.empty()) throw ShapeError("capsule_stack of zero branches");
  const Shape& s = branches.front().shape();
  if (s.size() != 3) throw ShapeError("capsule_stack expects HxWxC branches, got " + shape_string(s));
  for (const Var& b : branches) {
    if (b.shape() != s) {
      throw ShapeError("capsule_stack: branch " + shape_string(b.shape()) + " differs from " +
                       shape_string(s));
    }
  }
  const std::size_t h = s[0], w = s[1], c = s[2];
  const std::size_t n = h * w * c, nb = branches.size();
  // Capsule index (channel, row, col) -> storage offset in the HWC map.
  std::vector<std::size_t> src(n);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t col = 0; col < w; ++col) src[(ch * h + r) * w + col] = (r * w + col) * c + ch;
  std::vector<float> out(n * nb);
  for (std::size_t b = 0; b < nb; ++b) {
    auto v = branches[b].value();
    for (std::size_t i = 0; i < n; ++i) out[i * nb + b] = v[src[i]];
  }
  std::vector<std::size_t> ids;
  for (const Var& b : branches) ids.push_back(b.id());
  return branches.front().tape()->record(
      {n, nb}, std::move(out), branches,
      [ids, src = std::move(src), n, nb](Tape& t, std::span<const float> g) {
        for (std::size_t b = 0; b < nb; ++b) {
          if (!t.requires_grad(ids[b])) continue;
          auto d = t.grad_buffer(ids[b]);
          for (std::size_t i = 0; i < n; ++i) d[src[i]] += g[i * nb + b];
        }
      });
}

Var capsule_predict(Var u, Var weight) {
  const Shape& us = u.shape();
  const Shape& ws = weight.shape();
  if (us.size() != 2 || ws.size() != 3 || ws[0] != us[0] || ws[1] != us[1]) {
    throw ShapeError("capsule_predict: capsules " + shape_string(us) + " incompatible with weight " +
                     shape_string(ws));
  }
  const std::size_t n = us[0], din = us[1], m = ws[2];
  auto uv = u.value();
  auto wv = weight.value();
  std::vector<float> out(n * m);
  std::vector<double> acc(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t d = 0; d < din; ++d) {
      const double x = uv[i * din + d];
      const float* row = wv.data() + (i * din + d) * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += x * row[j];
    }
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = static_cast<float>(acc[j]);
  }
  const std::size_t uid = u.id(), wid = weight.id();
  return u.tape()->record({n, m}, std::move(out), {u, weight},
                          [uid, wid, n, din, m](Tape& t, std::span<const float> g) {
                            auto uv = t.value(uid);
                            auto wv = t.value(wid);
                            const bool gu = t.requires_grad(uid), gw = t.requires_grad(wid);
                            std::span<float> du, dw;
                            if (gu) du = t.grad_buffer(uid);
                            if (gw) dw = t.grad_buffer(wid);
                            for (std::size_t i = 0; i < n; ++i) {
                              const float* gi = g.data() + i * m;
                              for (std::size_t d = 0; d < din; ++d) {
                                const std::size_t row = (i * din + d) * m;
                                if (gu) {
                                  double a = 0.0;
                                  for (std::size_t j = 0; j < m; ++j) a += static_cast<double>(wv[row + j]) * gi[j];
                                  du[i * din + d] += static_cast<float>(a);
                                }
                                if (gw) {
                                  const float x = uv[i * din + d];
                                  for (std::size_t j = 0; j < m; ++j) dw[row + j] += x * gi[j];
                                }
                              }
                            }
                          });
}

Var routing_sum(Var predictions, const std::vector<float>& coupling) {
  const Shape& ps = predictions.shape();
  if (ps.size() != 3 || coupling.size() != ps[0] * ps[1]) {
    throw ShapeError("routing_sum: predictions " + shape_string(ps) + " with " +
                     std::to_string(coupling.size()) + " coupling coefficients");
  }
  const std::size_t nin = ps[0], nout = ps[1], dim = ps[2];
  auto pv = predictions.value();
  std::vector<double> acc(nout * dim, 0.0);
  for (std::size_t i = 0; i < nin; ++i)
    for (std::size_t j = 0; j < nout; ++j) {
      const double c = coupling[i * nout + j];
      const float* u = pv.data() + (i * nout + j) * dim;
      for (std::size_t d = 0; d < dim; ++d) acc[j * dim + d] += c * u[d];
    }
  std::vector<float> out(acc.begin(), acc.end());
  const std::size_t pid = predictions.id();
  return predictions.tape()->record(
      {nout, dim}, std::move(out), {predictions},
      [pid, coupling, nin, nout, dim](Tape& t, std::span<const float> g) {
        auto d = t.grad_buffer(pid);
        for (std::size_t i = 0; i < nin; ++i)
          for (std::size_t j = 0; j < nout; ++j) {
            const float c = coupling[i * nout + j];
            float* dst = d.data() + (i * nout + j) * dim;
            for (std::size_t k = 0; k < dim; ++k) dst[k] += c * g[j * dim + k];
          }
      });
}

}  // namespace capnet::num
