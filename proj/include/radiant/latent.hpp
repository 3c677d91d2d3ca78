#pragma once

// The two learned representations: pose codes anchored to body vertices and
// appearance codes anchored to depth-lifted point clouds, each diffused by a
// sparse 3-D conv net into a trilinearly queryable volume; plus the image
// encoder/decoder pair that feeds the appearance path.

#include "radiant/conv.hpp"
#include "radiant/dataset.hpp"
#include "radiant/nn.hpp"
#include "radiant/sparse_conv.hpp"

namespace radiant {

// ---------------------------------------------------------------------------
// Latent volumes

// Features live on the integer lattice scaled by `voxel` (node c is at world
// position c * voxel); queries interpolate over the 8 surrounding nodes with
// unoccupied nodes contributing zeros.
template <class S>
struct LatentVolume {
  double voxel = 0.02;
  std::vector<VoxelCoord> coords;
  VoxelIndexMap index;
  Tensor<S> features;  // [N, C]

  bool empty() const { return coords.empty(); }
  Eigen::Index feature_dim() const { return empty() ? 0 : features.dim(1); }
};

// Scatter-mean of per-point features into voxel rows; differentiable w.r.t.
// the input features (grad splits evenly across a voxel's points).
template <class S>
Tensor<S> scatter_mean(Tensor<S> features, const std::vector<Eigen::Index>& groups,
                       Eigen::Index n_groups) {
  if (features.rank() != 2) op_error("scatter_mean", "features must be [N,C]");
  if (Eigen::Index(groups.size()) != features.dim(0))
    op_error("scatter_mean", "group count does not match feature rows");
  Eigen::Index C = features.dim(1);
  ArrayX<S> v = ArrayX<S>::Zero(n_groups * C);
  std::vector<S> counts(size_t(n_groups), S(0));
  Eigen::Map<MatX<S>> vm(v.data(), n_groups, C);
  auto fm = features.mat();
  for (size_t i = 0; i < groups.size(); ++i) {
    vm.row(groups[i]) += fm.row(Eigen::Index(i));
    counts[size_t(groups[i])] += S(1);
  }
  for (Eigen::Index g = 0; g < n_groups; ++g)
    if (counts[size_t(g)] > S(0)) vm.row(g) /= counts[size_t(g)];
  return detail::make_result<S>(
      {n_groups, C}, std::move(v), {features},
      [groups, counts = std::move(counts), n_groups, C](typename Tensor<S>::Node& self) {
        auto& p = *self.parents[0];
        Eigen::Map<MatX<S>> fg(p.ensure_grad().data(), p.shape[0], C);
        Eigen::Map<const MatX<S>> g(self.grad.data(), n_groups, C);
        for (size_t i = 0; i < groups.size(); ++i)
          fg.row(Eigen::Index(i)) += g.row(groups[i]) / counts[size_t(groups[i])];
      });
}

inline VoxelCoord voxel_of(const Vec3& p, double voxel) {
  return {int32_t(std::floor(p.x() / voxel)), int32_t(std::floor(p.y() / voxel)),
          int32_t(std::floor(p.z() / voxel))};
}

// Features falling in the same voxel are averaged; the occupied set is
// recorded in first-appearance order for determinism.
template <class S>
LatentVolume<S> voxelize_codes(const std::vector<Vec3>& points, Tensor<S> features, double voxel) {
  if (voxel <= 0) throw std::invalid_argument("voxelize_codes: voxel size must be positive");
  if (Eigen::Index(points.size()) != features.dim(0))
    throw std::invalid_argument("voxelize_codes: points and features misaligned");
  LatentVolume<S> vol;
  vol.voxel = voxel;
  if (points.empty()) return vol;
  std::vector<Eigen::Index> groups(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    VoxelCoord c = voxel_of(points[i], voxel);
    auto [it, fresh] = vol.index.emplace(c, Eigen::Index(vol.coords.size()));
    if (fresh) vol.coords.push_back(c);
    groups[i] = it->second;
  }
  vol.features = scatter_mean(features, groups, Eigen::Index(vol.coords.size()));
  return vol;
}

// Trilinear query schedule: 8 corner rows (-1 for unoccupied) and weights.
template <class S>
void trilinear_weights(const LatentVolume<S>& vol, const std::vector<Vec3>& points,
                       Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic>& idx,
                       MatX<S>& w) {
  Eigen::Index Nq = Eigen::Index(points.size());
  idx.resize(Nq, 8);
  w.resize(Nq, 8);
  for (Eigen::Index q = 0; q < Nq; ++q) {
    Vec3 g = points[size_t(q)] / vol.voxel;
    Vec3 base(std::floor(g.x()), std::floor(g.y()), std::floor(g.z()));
    Vec3 f = g - base;
    for (int k = 0; k < 8; ++k) {
      int bx = k >> 2 & 1, by = k >> 1 & 1, bz = k & 1;
      VoxelCoord c{int32_t(base.x()) + bx, int32_t(base.y()) + by, int32_t(base.z()) + bz};
      auto it = vol.index.find(c);
      idx(q, k) = it == vol.index.end() ? -1 : it->second;
      w(q, k) = S((bx ? f.x() : 1 - f.x()) * (by ? f.y() : 1 - f.y()) * (bz ? f.z() : 1 - f.z()));
    }
  }
}

// [Nq, C]; zero rows for queries with no occupied neighbourhood or when the
// volume is empty.
template <class S>
Tensor<S> query_code(const LatentVolume<S>& vol, const std::vector<Vec3>& points,
                     Eigen::Index fallback_dim = 0) {
  if (vol.empty())
    return Tensor<S>::zeros({Eigen::Index(points.size()), fallback_dim});
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> idx;
  MatX<S> w;
  trilinear_weights(vol, points, idx, w);
  return gather_interp(vol.features, idx, w);
}

// ---------------------------------------------------------------------------
// Sparse diffusion network

// Stack of 3x3x3 sparse conv layers in dilate mode (relu between layers), so
// the occupied set grows by one voxel per layer and surface codes propagate
// into the surrounding band.
template <class S>
struct SparseDiffusionNet {
  std::vector<Tensor<S>> weights;  // [27*din, dout] per layer
  std::vector<Tensor<S>> biases;   // [1, dout]

  static SparseDiffusionNet create(ParamStore<S>& ps, const std::string& name,
                                   const std::vector<Eigen::Index>& dims, std::mt19937& rng) {
    SparseDiffusionNet net;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
      Eigen::Index din = dims[l], dout = dims[l + 1];
      net.weights.push_back(ps.create(name + "/conv" + std::to_string(l) + "/w", {27 * din, dout},
                                      kaiming_init<S>(27 * din * dout, 27 * din, rng)));
      net.biases.push_back(ps.create(name + "/conv" + std::to_string(l) + "/b", {1, dout},
                                     ArrayX<S>::Zero(dout)));
    }
    return net;
  }

  size_t depth() const { return weights.size(); }
  Eigen::Index input_dim() const { return weights.front().dim(0) / 27; }
  Eigen::Index output_dim() const { return weights.back().dim(1); }

  // Per-layer plans for a fixed input coordinate set; structure is reused
  // across steps since it depends only on the coordinates.
  std::vector<std::shared_ptr<const SparseConvPlan>> plan(
      const std::vector<VoxelCoord>& coords, const VoxelIndexMap& index) const {
    std::vector<std::shared_ptr<const SparseConvPlan>> plans;
    const std::vector<VoxelCoord>* c = &coords;
    const VoxelIndexMap* ix = &index;
    for (size_t l = 0; l < depth(); ++l) {
      auto p = std::make_shared<SparseConvPlan>(build_sparse_conv_plan(*c, *ix,
                                                                       SparseConvMode::dilate));
      c = &p->out_coords;
      ix = &p->out_index;
      plans.push_back(std::move(p));
    }
    return plans;
  }

  LatentVolume<S> run(const LatentVolume<S>& in,
                      const std::vector<std::shared_ptr<const SparseConvPlan>>& plans) const {
    if (in.empty()) return in;
    if (in.feature_dim() != input_dim())
      op_error("sparse_diffuse", "volume feature dim " + std::to_string(in.feature_dim()) +
                                     " does not match network input dim " +
                                     std::to_string(input_dim()));
    Tensor<S> f = in.features;
    for (size_t l = 0; l < depth(); ++l) {
      f = sparse_conv3d(f, weights[l], biases[l], plans[l]);
      if (l + 1 < depth()) f = relu(f);
    }
    LatentVolume<S> out;
    out.voxel = in.voxel;
    out.coords = plans.back()->out_coords;
    out.index = plans.back()->out_index;
    out.features = f;
    return out;
  }

  LatentVolume<S> run(const LatentVolume<S>& in) const {
    if (in.empty()) return in;
    return run(in, plan(in.coords, in.index));
  }
};

// ---------------------------------------------------------------------------
// Image encoder / decoder

template <class S>
struct FeaturePyramid {
  Tensor<S> map;  // [256, H/4, W/4]
  Eigen::Index in_h = 0, in_w = 0;
};

// Crop a [C,H,W] tensor to the top-left [C,Ho,Wo] corner.
template <class S>
Tensor<S> crop2d(Tensor<S> input, Eigen::Index Ho, Eigen::Index Wo) {
  if (input.rank() != 3) op_error("crop2d", "input must be [C,H,W]");
  Eigen::Index C = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (Ho > H || Wo > W) op_error("crop2d", "crop larger than input");
  if (Ho == H && Wo == W) return input;
  ArrayX<S> v(C * Ho * Wo);
  const auto& in = input.value();
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index y = 0; y < Ho; ++y)
      for (Eigen::Index x = 0; x < Wo; ++x) v[(c * Ho + y) * Wo + x] = in[(c * H + y) * W + x];
  return detail::make_result<S>(
      {C, Ho, Wo}, std::move(v), {input}, [C, H, W, Ho, Wo](typename Tensor<S>::Node& self) {
        auto& g_in = self.parents[0]->ensure_grad();
        for (Eigen::Index c = 0; c < C; ++c)
          for (Eigen::Index y = 0; y < Ho; ++y)
            for (Eigen::Index x = 0; x < Wo; ++x)
              g_in[(c * H + y) * W + x] += self.grad[(c * Ho + y) * Wo + x];
      });
}

// One residual stage: strided 3x3 conv, 3x3 conv, skip projection when the
// shape changes, relu at both joints.
template <class S>
struct EncoderStage {
  Tensor<S> w1, b1, w2, b2, wskip, bskip;
  Eigen::Index stride = 1;
  bool projected = false;

  static EncoderStage create(ParamStore<S>& ps, const std::string& name, Eigen::Index cin,
                             Eigen::Index cout, Eigen::Index stride, std::mt19937& rng) {
    EncoderStage st;
    st.stride = stride;
    st.w1 = ps.create(name + "/c1/w", {cout, cin * 9}, kaiming_init<S>(cout * cin * 9, cin * 9, rng));
    st.b1 = ps.create(name + "/c1/b", {1, cout}, ArrayX<S>::Zero(cout));
    st.w2 = ps.create(name + "/c2/w", {cout, cout * 9},
                      kaiming_init<S>(cout * cout * 9, cout * 9, rng));
    st.b2 = ps.create(name + "/c2/b", {1, cout}, ArrayX<S>::Zero(cout));
    st.projected = cin != cout || stride != 1;
    if (st.projected) {
      st.wskip = ps.create(name + "/skip/w", {cout, cin}, kaiming_init<S>(cout * cin, cin, rng));
      st.bskip = ps.create(name + "/skip/b", {1, cout}, ArrayX<S>::Zero(cout));
    }
    return st;
  }

  Tensor<S> operator()(Tensor<S> x) const {
    Tensor<S> h = relu(conv2d(x, w1, b1, Conv2dSpec{3, 3, stride, 1}));
    h = conv2d(h, w2, b2, Conv2dSpec{3, 3, 1, 1});
    Tensor<S> skip = projected ? conv2d(x, wskip, bskip, Conv2dSpec{1, 1, stride, 0}) : x;
    return relu(add(h, skip));
  }
};

// 4-stage residual CNN; levels resampled to stride 4, concatenated (176
// channels) and projected to a 256-channel map at 1/4 input resolution.
template <class S>
struct Encoder {
  std::vector<EncoderStage<S>> stages;  // channels 16/32/64/64, strides 1/2/2/2
  Tensor<S> wproj, bproj;               // 1x1, 176 -> 256

  static Encoder create(ParamStore<S>& ps, std::mt19937& rng) {
    Encoder e;
    Eigen::Index chans[4] = {16, 32, 64, 64}, strides[4] = {1, 2, 2, 2}, cin = 3;
    for (int s = 0; s < 4; ++s) {
      e.stages.push_back(EncoderStage<S>::create(ps, "encoder/stage" + std::to_string(s), cin,
                                                 chans[s], strides[s], rng));
      cin = chans[s];
    }
    e.wproj = ps.create("encoder/proj/w", {256, 176}, kaiming_init<S>(256 * 176, 176, rng));
    e.bproj = ps.create("encoder/proj/b", {1, 256}, ArrayX<S>::Zero(256));
    return e;
  }

  FeaturePyramid<S> operator()(Tensor<S> image) const {
    if (image.rank() != 3 || image.dim(0) != 3)
      op_error("encode_image", "image must be [3,H,W], got " + shape_str(image.shape()));
    Eigen::Index H = image.dim(1), W = image.dim(2);
    if (H % 4 || W % 4)
      op_error("encode_image", "image dims " + std::to_string(H) + "x" + std::to_string(W) +
                                   " not divisible by 4");
    Tensor<S> c1 = stages[0](image);   // 16 @ stride 1
    Tensor<S> c2 = stages[1](c1);      // 32 @ stride 2
    Tensor<S> c3 = stages[2](c2);      // 64 @ stride 4
    Tensor<S> c4 = stages[3](c3);      // 64 @ stride 8
    Eigen::Index H4 = H / 4, W4 = W / 4;
    Tensor<S> l1 = avg_pool2d(c1, 4);
    Tensor<S> l2 = avg_pool2d(c2, 2);
    Tensor<S> l4 = crop2d(upsample_nearest2d(c4, 2), H4, W4);
    auto flat = [&](Tensor<S> t) { return reshape(t, {t.dim(0), H4 * W4}); };
    std::vector<Tensor<S>> levels{flat(l1), flat(l2), flat(c3), flat(l4)};
    Tensor<S> cat = reshape(concat(levels, 0), {176, H4, W4});
    FeaturePyramid<S> pyr;
    pyr.map = conv2d(cat, wproj, bproj, Conv2dSpec{1, 1, 1, 0});
    pyr.in_h = H;
    pyr.in_w = W;
    return pyr;
  }
};

// Bilinear sampling schedule over a [C,Hm,Wm] map at map-space coordinates
// (clamp-to-edge). Map pixel (i,j) sits at map-space (j, i).
template <class S>
void bilinear_weights(Eigen::Index Hm, Eigen::Index Wm,
                      const std::vector<std::pair<double, double>>& coords,
                      Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic>& idx,
                      MatX<S>& w) {
  Eigen::Index Nq = Eigen::Index(coords.size());
  idx.resize(Nq, 4);
  w.resize(Nq, 4);
  for (Eigen::Index q = 0; q < Nq; ++q) {
    double u = std::clamp(coords[size_t(q)].first, 0.0, double(Wm - 1));
    double v = std::clamp(coords[size_t(q)].second, 0.0, double(Hm - 1));
    Eigen::Index x0 = Eigen::Index(std::floor(u)), y0 = Eigen::Index(std::floor(v));
    x0 = std::min(x0, Wm - 2 >= 0 ? Wm - 2 : 0);
    y0 = std::min(y0, Hm - 2 >= 0 ? Hm - 2 : 0);
    double fx = u - double(x0), fy = v - double(y0);
    Eigen::Index x1 = std::min(x0 + 1, Wm - 1), y1 = std::min(y0 + 1, Hm - 1);
    idx(q, 0) = y0 * Wm + x0;
    idx(q, 1) = y0 * Wm + x1;
    idx(q, 2) = y1 * Wm + x0;
    idx(q, 3) = y1 * Wm + x1;
    w(q, 0) = S((1 - fx) * (1 - fy));
    w(q, 1) = S(fx * (1 - fy));
    w(q, 2) = S((1 - fx) * fy);
    w(q, 3) = S(fx * fy);
  }
}

// Bilinear sample at map-space coordinates -> [Nq, C].
template <class S>
Tensor<S> sample_feature_map(Tensor<S> map, const std::vector<std::pair<double, double>>& coords) {
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> idx;
  MatX<S> w;
  bilinear_weights<S>(map.dim(1), map.dim(2), coords, idx, w);
  return gather_bilinear_chw(map, idx, w);
}

// Pixel-aligned 256-vectors for input-image pixel coordinates; the stride-4
// map is sampled at the corresponding map-space location.
template <class S>
Tensor<S> sample_pixel_aligned(const FeaturePyramid<S>& pyr,
                               const std::vector<std::pair<double, double>>& pixels) {
  std::vector<std::pair<double, double>> coords;
  coords.reserve(pixels.size());
  for (auto [u, v] : pixels) coords.push_back({u / 4.0 - 0.5, v / 4.0 - 0.5});
  return sample_feature_map(pyr.map, coords);
}

// Three 1x1 stages reducing the pixel-aligned 256-vector to the 64-dim
// appearance anchor code. 1x1 convs commute with bilinear sampling, so they
// are applied to the sampled vectors.
template <class S>
struct AppearanceReduction {
  Linear<S> l1, l2, l3;

  static AppearanceReduction create(ParamStore<S>& ps, std::mt19937& rng) {
    AppearanceReduction r;
    r.l1 = Linear<S>::create(ps, "appearance/reduce1", 256, 128, rng);
    r.l2 = Linear<S>::create(ps, "appearance/reduce2", 128, 96, rng);
    r.l3 = Linear<S>::create(ps, "appearance/reduce3", 96, 64, rng);
    return r;
  }

  Tensor<S> operator()(Tensor<S> x) const { return l3(relu(l2(relu(l1(x))))); }
};

// Depth-lift the input view, attach reduced pixel-aligned features, voxelize,
// diffuse. Empty cloud -> empty volume (queries return zeros).
template <class S>
LatentVolume<S> build_appearance_volume(const Frame& frame, int view_index, const Camera& camera,
                                        const FeaturePyramid<S>& pyramid,
                                        const AppearanceReduction<S>& reduction,
                                        const SparseDiffusionNet<S>& net, double voxel,
                                        const PointHashGrid* surface = nullptr) {
  PointCloud cloud = lift_depth_to_points(frame, view_index, camera, surface);
  if (cloud.points.empty()) return LatentVolume<S>{voxel};
  Tensor<S> feats = reduction(sample_pixel_aligned(pyramid, cloud.pixels));
  return net.run(voxelize_codes(cloud.points, feats, voxel));
}

// Reconstruction decoder: the 256-channel stride-4 map upsampled back to the
// input resolution, sigmoid output in [0,1].
template <class S>
struct Decoder {
  Tensor<S> w1, b1, w2, b2, w3, b3;

  static Decoder create(ParamStore<S>& ps, std::mt19937& rng) {
    Decoder d;
    std::mt19937& r = rng;
    d.w1 = ps.create("decoder/c1/w", {64, 256 * 9}, kaiming_init<S>(64 * 256 * 9, 256 * 9, r));
    d.b1 = ps.create("decoder/c1/b", {1, 64}, ArrayX<S>::Zero(64));
    d.w2 = ps.create("decoder/c2/w", {32, 64 * 9}, kaiming_init<S>(32 * 64 * 9, 64 * 9, r));
    d.b2 = ps.create("decoder/c2/b", {1, 32}, ArrayX<S>::Zero(32));
    d.w3 = ps.create("decoder/c3/w", {3, 32 * 9}, kaiming_init<S>(3 * 32 * 9, 32 * 9, r));
    d.b3 = ps.create("decoder/c3/b", {1, 3}, ArrayX<S>::Zero(3));
    return d;
  }

  Tensor<S> operator()(const FeaturePyramid<S>& pyr) const {
    Tensor<S> x = relu(conv2d(pyr.map, w1, b1, Conv2dSpec{3, 3, 1, 1}));
    x = upsample_nearest2d(x, 2);
    x = relu(conv2d(x, w2, b2, Conv2dSpec{3, 3, 1, 1}));
    x = upsample_nearest2d(x, 2);
    x = conv2d(x, w3, b3, Conv2dSpec{3, 3, 1, 1});
    return sigmoid(crop2d(x, pyr.in_h, pyr.in_w));
  }
};

// N_m learnable 16-dim codes, one per mesh vertex, shared across frames.
template <class S>
Tensor<S> create_pose_codes(ParamStore<S>& ps, Eigen::Index n_vertices, std::mt19937& rng,
                            Eigen::Index dim = 16) {
  return ps.create("pose_codes", {n_vertices, dim},
                   normal_init<S>(n_vertices * dim, S(0.1), rng));
}

}  // namespace radiant
