#pragma once

// Dense 2-D convolution ops over [C,H,W] tensors (single image, im2col + GEMM).

#include "radiant/tensor.hpp"

namespace radiant {

struct Conv2dSpec {
  Eigen::Index kh = 3, kw = 3;
  Eigen::Index stride = 1;
  Eigen::Index pad = 1;
};

namespace detail {

// col(kidx, out_pixel) with kidx = (c*kh+ky)*kw+kx, zero outside the image.
template <class S>
MatX<S> im2col(const ArrayX<S>& in, Eigen::Index C, Eigen::Index H, Eigen::Index W,
               const Conv2dSpec& sp, Eigen::Index Ho, Eigen::Index Wo) {
  MatX<S> col = MatX<S>::Zero(C * sp.kh * sp.kw, Ho * Wo);
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index ky = 0; ky < sp.kh; ++ky)
      for (Eigen::Index kx = 0; kx < sp.kw; ++kx) {
        Eigen::Index row = (c * sp.kh + ky) * sp.kw + kx;
        for (Eigen::Index oy = 0; oy < Ho; ++oy) {
          Eigen::Index y = oy * sp.stride + ky - sp.pad;
          if (y < 0 || y >= H) continue;
          for (Eigen::Index ox = 0; ox < Wo; ++ox) {
            Eigen::Index x = ox * sp.stride + kx - sp.pad;
            if (x < 0 || x >= W) continue;
            col(row, oy * Wo + ox) = in[(c * H + y) * W + x];
          }
        }
      }
  return col;
}

// Adjoint of im2col: scatter-add columns back into the image.
template <class S>
void col2im(const MatX<S>& col, Eigen::Index C, Eigen::Index H, Eigen::Index W,
            const Conv2dSpec& sp, Eigen::Index Ho, Eigen::Index Wo, ArrayX<S>& out) {
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index ky = 0; ky < sp.kh; ++ky)
      for (Eigen::Index kx = 0; kx < sp.kw; ++kx) {
        Eigen::Index row = (c * sp.kh + ky) * sp.kw + kx;
        for (Eigen::Index oy = 0; oy < Ho; ++oy) {
          Eigen::Index y = oy * sp.stride + ky - sp.pad;
          if (y < 0 || y >= H) continue;
          for (Eigen::Index ox = 0; ox < Wo; ++ox) {
            Eigen::Index x = ox * sp.stride + kx - sp.pad;
            if (x < 0 || x >= W) continue;
            out[(c * H + y) * W + x] += col(row, oy * Wo + ox);
          }
        }
      }
}

}  // namespace detail

// input [Cin,H,W], weight [Cout, Cin*kh*kw], bias [1,Cout] -> [Cout,Ho,Wo]
template <class S>
Tensor<S> conv2d(Tensor<S> input, Tensor<S> weight, Tensor<S> bias, Conv2dSpec sp) {
  if (input.rank() != 3) op_error("conv2d", "input must be [C,H,W], got " + shape_str(input.shape()));
  Eigen::Index C = input.dim(0), H = input.dim(1), W = input.dim(2);
  Eigen::Index K = C * sp.kh * sp.kw;
  if (weight.rank() != 2 || weight.dim(1) != K)
    op_error("conv2d", "weight shape " + shape_str(weight.shape()) + " incompatible with Cin*kh*kw=" +
                           std::to_string(K));
  Eigen::Index Cout = weight.dim(0);
  if (bias.numel() != Cout) op_error("conv2d", "bias size mismatch");
  Eigen::Index Ho = (H + 2 * sp.pad - sp.kh) / sp.stride + 1;
  Eigen::Index Wo = (W + 2 * sp.pad - sp.kw) / sp.stride + 1;
  MatX<S> col = detail::im2col(input.value(), C, H, W, sp, Ho, Wo);
  ArrayX<S> v(Cout * Ho * Wo);
  Eigen::Map<MatX<S>> vm(v.data(), Cout, Ho * Wo);
  vm.noalias() = weight.mat() * col;
  vm.colwise() += Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(bias.value().data(), Cout);
  MatX<S> wv = weight.mat();
  return detail::make_result<S>(
      {Cout, Ho, Wo}, std::move(v), {input, weight, bias},
      [sp, C, H, W, Ho, Wo, Cout, col = std::move(col), wv = std::move(wv)](
          typename Tensor<S>::Node& self) {
        Eigen::Map<const MatX<S>> g(self.grad.data(), Cout, Ho * Wo);
        {
          auto& wg = self.parents[1]->ensure_grad();
          Eigen::Map<MatX<S>>(wg.data(), wv.rows(), wv.cols()).noalias() += g * col.transpose();
        }
        {
          auto& bg = self.parents[2]->ensure_grad();
          Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>(bg.data(), Cout) += g.rowwise().sum();
        }
        {
          MatX<S> dcol = wv.transpose() * g;
          detail::col2im(dcol, C, H, W, sp, Ho, Wo, self.parents[0]->ensure_grad());
        }
      });
}

// input [Cin,H,W], weight [Cin, Cout*kh*kw], bias [1,Cout] -> [Cout,Ho,Wo]
// with Ho = (H-1)*stride + kh - 2*pad (adjoint of conv2d's spatial map).
template <class S>
Tensor<S> conv_transpose2d(Tensor<S> input, Tensor<S> weight, Tensor<S> bias, Conv2dSpec sp) {
  if (input.rank() != 3)
    op_error("conv_transpose2d", "input must be [C,H,W], got " + shape_str(input.shape()));
  Eigen::Index Cin = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (weight.rank() != 2 || weight.dim(0) != Cin)
    op_error("conv_transpose2d", "weight shape " + shape_str(weight.shape()) +
                                     " incompatible with Cin=" + std::to_string(Cin));
  Eigen::Index Cout = weight.dim(1) / (sp.kh * sp.kw);
  if (Cout * sp.kh * sp.kw != weight.dim(1))
    op_error("conv_transpose2d", "weight columns not divisible by kh*kw");
  if (bias.numel() != Cout) op_error("conv_transpose2d", "bias size mismatch");
  Eigen::Index Ho = (H - 1) * sp.stride + sp.kh - 2 * sp.pad;
  Eigen::Index Wo = (W - 1) * sp.stride + sp.kw - 2 * sp.pad;
  // tmp(koidx, in_pixel) with koidx = (co*kh+ky)*kw+kx; scatter into the output.
  MatX<S> tmp = weight.mat().transpose() * Eigen::Map<const MatX<S>>(input.value().data(), Cin, H * W);
  ArrayX<S> v = ArrayX<S>::Zero(Cout * Ho * Wo);
  Conv2dSpec osp = sp;  // same kernel/stride/pad, roles of in/out swapped
  detail::col2im(tmp, Cout, Ho, Wo, osp, H, W, v);
  for (Eigen::Index c = 0; c < Cout; ++c)
    v.segment(c * Ho * Wo, Ho * Wo) += bias.value()[c];
  MatX<S> wv = weight.mat();
  MatX<S> inmat = Eigen::Map<const MatX<S>>(input.value().data(), Cin, H * W);
  return detail::make_result<S>(
      {Cout, Ho, Wo}, std::move(v), {input, weight, bias},
      [sp, Cin, H, W, Ho, Wo, Cout, wv = std::move(wv), inmat = std::move(inmat)](
          typename Tensor<S>::Node& self) {
        // Gather the output gradient into im2col layout over the *output* image.
        MatX<S> gcol = detail::im2col(self.grad, Cout, Ho, Wo, sp, H, W);
        {
          auto& ig = self.parents[0]->ensure_grad();
          Eigen::Map<MatX<S>>(ig.data(), Cin, H * W).noalias() += wv * gcol;
        }
        {
          auto& wg = self.parents[1]->ensure_grad();
          Eigen::Map<MatX<S>>(wg.data(), wv.rows(), wv.cols()).noalias() +=
              inmat * gcol.transpose();
        }
        {
          auto& bg = self.parents[2]->ensure_grad();
          for (Eigen::Index c = 0; c < Cout; ++c)
            bg[c] += self.grad.segment(c * Ho * Wo, Ho * Wo).sum();
        }
      });
}

// Average-pool by an integer factor, [C,H,W] -> [C,H/f,W/f].
template <class S>
Tensor<S> avg_pool2d(Tensor<S> input, Eigen::Index f) {
  if (input.rank() != 3) op_error("avg_pool2d", "input must be [C,H,W]");
  Eigen::Index C = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (H % f || W % f) op_error("avg_pool2d", "dims not divisible by factor");
  Eigen::Index Ho = H / f, Wo = W / f;
  S inv = S(1) / S(f * f);
  ArrayX<S> v = ArrayX<S>::Zero(C * Ho * Wo);
  const auto& in = input.value();
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index y = 0; y < H; ++y)
      for (Eigen::Index x = 0; x < W; ++x)
        v[(c * Ho + y / f) * Wo + x / f] += in[(c * H + y) * W + x] * inv;
  return detail::make_result<S>(
      {C, Ho, Wo}, std::move(v), {input}, [C, H, W, f, Ho, Wo, inv](typename Tensor<S>::Node& self) {
        auto& ig = self.parents[0]->ensure_grad();
        for (Eigen::Index c = 0; c < C; ++c)
          for (Eigen::Index y = 0; y < H; ++y)
            for (Eigen::Index x = 0; x < W; ++x)
              ig[(c * H + y) * W + x] += self.grad[(c * Ho + y / f) * Wo + x / f] * inv;
      });
}

// Nearest-neighbour upsample by an integer factor, [C,H,W] -> [C,H*f,W*f].
template <class S>
Tensor<S> upsample_nearest2d(Tensor<S> input, Eigen::Index f) {
  if (input.rank() != 3) op_error("upsample_nearest2d", "input must be [C,H,W]");
  Eigen::Index C = input.dim(0), H = input.dim(1), W = input.dim(2);
  Eigen::Index Ho = H * f, Wo = W * f;
  ArrayX<S> v(C * Ho * Wo);
  const auto& in = input.value();
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index y = 0; y < Ho; ++y)
      for (Eigen::Index x = 0; x < Wo; ++x)
        v[(c * Ho + y) * Wo + x] = in[(c * H + y / f) * W + x / f];
  return detail::make_result<S>(
      {C, Ho, Wo}, std::move(v), {input}, [C, H, W, f, Ho, Wo](typename Tensor<S>::Node& self) {
        auto& ig = self.parents[0]->ensure_grad();
        for (Eigen::Index c = 0; c < C; ++c)
          for (Eigen::Index y = 0; y < Ho; ++y)
            for (Eigen::Index x = 0; x < Wo; ++x)
              ig[(c * H + y / f) * W + x / f] += self.grad[(c * Ho + y) * Wo + x];
      });
}

}  // namespace radiant
