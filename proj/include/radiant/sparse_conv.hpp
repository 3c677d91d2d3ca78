#pragma once

// Sparse 3-D convolution over hash-indexed voxel coordinate lists, plus the
// interpolating gather ops (trilinear volume query, bilinear map sampling).

#include "radiant/tensor.hpp"

#include <array>
#include <unordered_map>

namespace radiant {

struct VoxelCoord {
  int32_t x = 0, y = 0, z = 0;
  bool operator==(const VoxelCoord& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct VoxelCoordHash {
  size_t operator()(const VoxelCoord& c) const {
    // Three large primes; coordinates stay small so collisions are rare.
    uint64_t h = uint64_t(uint32_t(c.x)) * 73856093ull ^ uint64_t(uint32_t(c.y)) * 19349669ull ^
                 uint64_t(uint32_t(c.z)) * 83492791ull;
    return size_t(h);
  }
};

using VoxelIndexMap = std::unordered_map<VoxelCoord, Eigen::Index, VoxelCoordHash>;

enum class SparseConvMode {
  submanifold,  // outputs only at the input's occupied sites
  dilate,       // outputs at the occupied set dilated by the 3x3x3 neighbourhood
};

// Gather/scatter schedule for one 3x3x3 sparse convolution over a fixed
// coordinate set. Structure depends only on coordinates, so it is built once
// per frame and reused every step.
struct SparseConvPlan {
  std::vector<VoxelCoord> out_coords;
  VoxelIndexMap out_index;
  // pairs[o] lists (input_row, output_row) for kernel offset o in 0..26,
  // where offset o decodes to (dx,dy,dz) = (o/9-1, o/3%3-1, o%3-1) and
  // out[p] accumulates W_o * in[p + (dx,dy,dz)].
  std::array<std::vector<std::pair<Eigen::Index, Eigen::Index>>, 27> pairs;

  Eigen::Index out_size() const { return Eigen::Index(out_coords.size()); }
};

inline SparseConvPlan build_sparse_conv_plan(const std::vector<VoxelCoord>& in_coords,
                                             const VoxelIndexMap& in_index,
                                             SparseConvMode mode) {
  SparseConvPlan plan;
  if (mode == SparseConvMode::submanifold) {
    plan.out_coords = in_coords;
    plan.out_index = in_index;
  } else {
    for (const auto& c : in_coords)
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            VoxelCoord n{c.x + dx, c.y + dy, c.z + dz};
            if (plan.out_index.emplace(n, Eigen::Index(plan.out_coords.size())).second)
              plan.out_coords.push_back(n);
          }
  }
  for (Eigen::Index out_row = 0; out_row < plan.out_size(); ++out_row) {
    const auto& p = plan.out_coords[size_t(out_row)];
    for (int o = 0; o < 27; ++o) {
      VoxelCoord q{p.x + o / 9 - 1, p.y + (o / 3) % 3 - 1, p.z + o % 3 - 1};
      auto it = in_index.find(q);
      if (it != in_index.end()) plan.pairs[size_t(o)].push_back({it->second, out_row});
    }
  }
  return plan;
}

// features [Nin,Cin], weight [27*Cin,Cout], bias [1,Cout] -> [Nout,Cout]
template <class S>
Tensor<S> sparse_conv3d(Tensor<S> features, Tensor<S> weight, Tensor<S> bias,
                        std::shared_ptr<const SparseConvPlan> plan) {
  if (features.rank() != 2)
    op_error("sparse_conv3d", "features must be [N,Cin], got " + shape_str(features.shape()));
  Eigen::Index Cin = features.dim(1);
  if (weight.rank() != 2 || weight.dim(0) != 27 * Cin)
    op_error("sparse_conv3d", "weight shape " + shape_str(weight.shape()) +
                                  " incompatible with 27*Cin=" + std::to_string(27 * Cin));
  Eigen::Index Cout = weight.dim(1);
  if (bias.numel() != Cout) op_error("sparse_conv3d", "bias size mismatch");
  Eigen::Index Nout = plan->out_size();
  ArrayX<S> v(Nout * Cout);
  Eigen::Map<MatX<S>> vm(v.data(), Nout, Cout);
  vm = Eigen::Map<const MatX<S>>(bias.value().data(), 1, Cout).replicate(Nout, 1);
  auto fm = features.mat();
  auto wm = weight.mat();
  for (int o = 0; o < 27; ++o) {
    const auto& pairs = plan->pairs[size_t(o)];
    if (pairs.empty()) continue;
    MatX<S> gathered(Eigen::Index(pairs.size()), Cin);
    for (size_t i = 0; i < pairs.size(); ++i) gathered.row(Eigen::Index(i)) = fm.row(pairs[i].first);
    MatX<S> prod = gathered * wm.middleRows(Eigen::Index(o) * Cin, Cin);
    for (size_t i = 0; i < pairs.size(); ++i) vm.row(pairs[i].second) += prod.row(Eigen::Index(i));
  }
  MatX<S> fv = features.mat();
  MatX<S> wv = weight.mat();
  return detail::make_result<S>(
      {Nout, Cout}, std::move(v), {features, weight, bias},
      [plan, Cin, Cout, Nout, fv = std::move(fv), wv = std::move(wv)](
          typename Tensor<S>::Node& self) {
        Eigen::Map<const MatX<S>> g(self.grad.data(), Nout, Cout);
        auto& fg_raw = self.parents[0]->ensure_grad();
        Eigen::Map<MatX<S>> fg(fg_raw.data(), fv.rows(), Cin);
        auto& wg_raw = self.parents[1]->ensure_grad();
        Eigen::Map<MatX<S>> wg(wg_raw.data(), 27 * Cin, Cout);
        for (int o = 0; o < 27; ++o) {
          const auto& pairs = plan->pairs[size_t(o)];
          if (pairs.empty()) continue;
          Eigen::Index P = Eigen::Index(pairs.size());
          MatX<S> g_gather(P, Cout), in_gather(P, Cin);
          for (Eigen::Index i = 0; i < P; ++i) {
            g_gather.row(i) = g.row(pairs[size_t(i)].second);
            in_gather.row(i) = fv.row(pairs[size_t(i)].first);
          }
          wg.middleRows(Eigen::Index(o) * Cin, Cin).noalias() += in_gather.transpose() * g_gather;
          MatX<S> din = g_gather * wv.middleRows(Eigen::Index(o) * Cin, Cin).transpose();
          for (Eigen::Index i = 0; i < P; ++i) fg.row(pairs[size_t(i)].first) += din.row(i);
        }
        auto& bg = self.parents[2]->ensure_grad();
        Eigen::Map<MatX<S>>(bg.data(), 1, Cout) += g.colwise().sum();
      });
}

// ---------------------------------------------------------------------------
// Interpolating gathers. Corner indices of -1 denote empty sites contributing
// zero; interpolation weights are fixed data (queries are not differentiated),
// the op is differentiable with respect to the stored features.

// features [Nvox,C], idx/w [Nq,K] -> [Nq,C]
template <class S>
Tensor<S> gather_interp(Tensor<S> features, const Eigen::Matrix<Eigen::Index, Eigen::Dynamic,
                                                                Eigen::Dynamic>& idx,
                        const MatX<S>& w) {
  if (features.rank() != 2) op_error("gather_interp", "features must be [N,C]");
  if (idx.rows() != w.rows() || idx.cols() != w.cols())
    op_error("gather_interp", "index/weight shape mismatch");
  Eigen::Index Nq = idx.rows(), K = idx.cols(), C = features.dim(1);
  ArrayX<S> v = ArrayX<S>::Zero(Nq * C);
  Eigen::Map<MatX<S>> vm(v.data(), Nq, C);
  auto fm = features.mat();
  for (Eigen::Index q = 0; q < Nq; ++q)
    for (Eigen::Index k = 0; k < K; ++k) {
      Eigen::Index r = idx(q, k);
      if (r >= 0) vm.row(q) += w(q, k) * fm.row(r);
    }
  return detail::make_result<S>(
      {Nq, C}, std::move(v), {features}, [idx, w, Nq, K, C](typename Tensor<S>::Node& self) {
        auto& fg_raw = self.parents[0]->ensure_grad();
        Eigen::Map<MatX<S>> fg(fg_raw.data(), self.parents[0]->shape[0], C);
        Eigen::Map<const MatX<S>> g(self.grad.data(), Nq, C);
        for (Eigen::Index q = 0; q < Nq; ++q)
          for (Eigen::Index k = 0; k < K; ++k) {
            Eigen::Index r = idx(q, k);
            if (r >= 0) fg.row(r) += w(q, k) * g.row(q);
          }
      });
}

// map [C,H,W], idx [Nq,4] flat pixel indices, w [Nq,4] -> [Nq,C]
template <class S>
Tensor<S> gather_bilinear_chw(Tensor<S> map,
                              const Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic>& idx,
                              const MatX<S>& w) {
  if (map.rank() != 3) op_error("gather_bilinear", "map must be [C,H,W]");
  Eigen::Index C = map.dim(0), HW = map.dim(1) * map.dim(2);
  Eigen::Index Nq = idx.rows(), K = idx.cols();
  ArrayX<S> v = ArrayX<S>::Zero(Nq * C);
  Eigen::Map<MatX<S>> vm(v.data(), Nq, C);
  const auto& mv = map.value();
  for (Eigen::Index q = 0; q < Nq; ++q)
    for (Eigen::Index k = 0; k < K; ++k) {
      Eigen::Index p = idx(q, k);
      for (Eigen::Index c = 0; c < C; ++c) vm(q, c) += w(q, k) * mv[c * HW + p];
    }
  return detail::make_result<S>(
      {Nq, C}, std::move(v), {map}, [idx, w, Nq, K, C, HW](typename Tensor<S>::Node& self) {
        auto& mg = self.parents[0]->ensure_grad();
        Eigen::Map<const MatX<S>> g(self.grad.data(), Nq, C);
        for (Eigen::Index q = 0; q < Nq; ++q)
          for (Eigen::Index k = 0; k < K; ++k) {
            Eigen::Index p = idx(q, k);
            for (Eigen::Index c = 0; c < C; ++c) mg[c * HW + p] += w(q, k) * g(q, c);
          }
      });
}

}  // namespace radiant
