#include <Eigen/Core>
#include <algorithm>
#include <string>

#include "capnet/ops.hpp"

namespace capnet::num {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
  std::size_t in_h, in_w, in_c, k, stride, out_h, out_w, out_c;
  std::size_t patch() const { return k * k * in_c; }
  std::size_t positions() const { return out_h * out_w; }
};

// Patch matrix [positions x k*k*Cin]; a kernel row (ky, kx..kx+k) of an HWC
// image is one contiguous run of k*Cin floats.
void im2col(const ConvGeometry& g, const float* in, float* col) {
  const std::size_t run = g.k * g.in_c;
  for (std::size_t oy = 0; oy < g.out_h; ++oy)
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      float* dst = col + (oy * g.out_w + ox) * g.patch();
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const float* src = in + ((oy * g.stride + ky) * g.in_w + ox * g.stride) * g.in_c;
        std::copy_n(src, run, dst + ky * run);
      }
    }
}

void col2im_add(const ConvGeometry& g, const float* col, float* in_grad) {
  const std::size_t run = g.k * g.in_c;
  for (std::size_t oy = 0; oy < g.out_h; ++oy)
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const float* src = col + (oy * g.out_w + ox) * g.patch();
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        float* dst = in_grad + ((oy * g.stride + ky) * g.in_w + ox * g.stride) * g.in_c;
        const float* s = src + ky * run;
        for (std::size_t i = 0; i < run; ++i) dst[i] += s[i];
      }
    }
}

}  // namespace

Var conv2d(Var input, Var kernels, std::size_t stride) {
  const Shape& is = input.shape();
  const Shape& ks = kernels.shape();
  if (is.size() != 3) throw ShapeError("conv2d: input must be HxWxC, got " + shape_string(is));
  if (ks.size() != 4 || ks[0] != ks[1]) {
    throw ShapeError("conv2d: kernels must be k x k x Cin x Cout, got " + shape_string(ks));
  }
  if (ks[2] != is[2]) {
    throw ShapeError("conv2d: kernel input channels " + std::to_string(ks[2]) +
                     " do not match input channels " + std::to_string(is[2]) + " (input " +
                     shape_string(is) + ", kernels " + shape_string(ks) + ")");
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (is[0] < ks[0] || is[1] < ks[0]) {
    throw ShapeError("conv2d: input " + shape_string(is) + " smaller than kernel " +
                     std::to_string(ks[0]));
  }
  ConvGeometry g{is[0], is[1], is[2], ks[0], stride, (is[0] - ks[0]) / stride + 1,
                 (is[1] - ks[0]) / stride + 1, ks[3]};

  std::vector<float> col(g.positions() * g.patch());
  im2col(g, input.value().data(), col.data());
  std::vector<float> out(g.positions() * g.out_c);
  ConstMatrixMap cm(col.data(), g.positions(), g.patch());
  ConstMatrixMap km(kernels.value().data(), g.patch(), g.out_c);
  MatrixMap(out.data(), g.positions(), g.out_c).noalias() = cm * km;

  const std::size_t iid = input.id(), kid = kernels.id();
  return input.tape()->record(
      {g.out_h, g.out_w, g.out_c}, std::move(out), {input, kernels},
      [g, iid, kid](Tape& t, std::span<const float> grad) {
        ConstMatrixMap gm(grad.data(), g.positions(), g.out_c);
        if (t.requires_grad(kid)) {
          std::vector<float> col(g.positions() * g.patch());
          im2col(g, t.value(iid).data(), col.data());
          ConstMatrixMap cm(col.data(), g.positions(), g.patch());
          MatrixMap(t.grad_buffer(kid).data(), g.patch(), g.out_c).noalias() += cm.transpose() * gm;
        }
        if (t.requires_grad(iid)) {
          ConstMatrixMap km(t.value(kid).data(), g.patch(), g.out_c);
          RowMatrix dcol = gm * km.transpose();
          col2im_add(g, dcol.data(), t.grad_buffer(iid).data());
        }
      });
}

}  // namespace capnet::num
