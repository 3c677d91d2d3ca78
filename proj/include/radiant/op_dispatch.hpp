#pragma once

// Uniform entry point over the op vocabulary. Mostly used by the gradient
// sweep in the tests; pipeline code calls the typed functions directly.

#include "radiant/conv.hpp"
#include "radiant/sparse_conv.hpp"

namespace radiant {

enum class OpKind {
  add,
  sub,
  mul,
  matmul,
  relu,
  sigmoid,
  softplus,
  exp,
  log,
  softmax_axis,
  concat,
  slice,
  sum_axis,
  mean_axis,
  conv2d,
  transposed_conv2d,
  sparse_conv3d,
  trilinear_gather,
  bilinear_gather,
};

inline const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::matmul: return "matmul";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::softplus: return "softplus";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::softmax_axis: return "softmax-over-axis";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::sum_axis: return "sum-over-axis";
    case OpKind::mean_axis: return "mean-over-axis";
    case OpKind::conv2d: return "conv2d";
    case OpKind::transposed_conv2d: return "transposed-conv2d";
    case OpKind::sparse_conv3d: return "sparse-conv3d";
    case OpKind::trilinear_gather: return "trilinear-gather";
    case OpKind::bilinear_gather: return "bilinear-gather";
  }
  return "?";
}

// Structured ops (conv, sparse conv, gathers) get a canonical small geometry
// derived from the input shapes so one call signature covers every kind.
template <class S>
Tensor<S> forward_op(OpKind kind, std::vector<Tensor<S>> in) {
  auto need = [&](size_t n) {
    if (in.size() != n)
      op_error(op_kind_name(kind), "expected " + std::to_string(n) + " inputs, got " +
                                       std::to_string(in.size()));
  };
  switch (kind) {
    case OpKind::add: need(2); return add(in[0], in[1]);
    case OpKind::sub: need(2); return sub(in[0], in[1]);
    case OpKind::mul: need(2); return mul(in[0], in[1]);
    case OpKind::matmul: need(2); return matmul(in[0], in[1]);
    case OpKind::relu: need(1); return relu(in[0]);
    case OpKind::sigmoid: need(1); return sigmoid(in[0]);
    case OpKind::softplus: need(1); return softplus(in[0]);
    case OpKind::exp: need(1); return exp(in[0]);
    case OpKind::log: need(1); return log(in[0]);
    case OpKind::softmax_axis: need(1); return softmax(in[0], 1);
    case OpKind::concat: return concat(in, 1);
    case OpKind::slice: need(1); return slice_cols(in[0], 0, std::max<Eigen::Index>(1, in[0].dim(1) / 2));
    case OpKind::sum_axis: need(1); return sum(in[0], 1);
    case OpKind::mean_axis: need(1); return mean(in[0], 1);
    case OpKind::conv2d: need(3); return conv2d(in[0], in[1], in[2], Conv2dSpec{});
    case OpKind::transposed_conv2d:
      need(3);
      return conv_transpose2d(in[0], in[1], in[2], Conv2dSpec{3, 3, 2, 1});
    case OpKind::sparse_conv3d: {
      need(3);
      // Canonical geometry: a 2x2x2 block of occupied voxels, submanifold.
      std::vector<VoxelCoord> coords;
      VoxelIndexMap index;
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
          for (int z = 0; z < 2; ++z) {
            index[{x, y, z}] = Eigen::Index(coords.size());
            coords.push_back({x, y, z});
          }
      if (in[0].dim(0) != 8) op_error("sparse-conv3d", "canonical geometry expects 8 feature rows");
      auto plan = std::make_shared<SparseConvPlan>(
          build_sparse_conv_plan(coords, index, SparseConvMode::submanifold));
      return sparse_conv3d(in[0], in[1], in[2], plan);
    }
    case OpKind::trilinear_gather: {
      need(1);
      Eigen::Index n = in[0].dim(0);
      Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> idx(2, 8);
      MatX<S> w(2, 8);
      for (Eigen::Index k = 0; k < 8; ++k) {
        idx(0, k) = k % n;
        idx(1, k) = (k * 3 + 1) % n;
        w(0, k) = S(1) / S(8);
        w(1, k) = S(k + 1) / S(36);
      }
      return gather_interp(in[0], idx, w);
    }
    case OpKind::bilinear_gather: {
      need(1);
      Eigen::Index HW = in[0].dim(1) * in[0].dim(2);
      Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> idx(2, 4);
      MatX<S> w(2, 4);
      for (Eigen::Index k = 0; k < 4; ++k) {
        idx(0, k) = k % HW;
        idx(1, k) = (k * 2 + 1) % HW;
        w(0, k) = S(0.25);
        w(1, k) = S(k + 1) / S(10);
      }
      return gather_bilinear_chw(in[0], idx, w);
    }
  }
  op_error("forward_op", "unknown op kind");
}

}  // namespace radiant
