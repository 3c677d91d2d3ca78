#pragma once

// Full model assembly and the per-frame rendering pipeline: pose/appearance
// volumes, keep-mask, temporal fusion, hierarchical sampling, compositing.

#include "radiant/dataset.hpp"
#include "radiant/fusion.hpp"
#include "radiant/latent.hpp"
#include "radiant/render.hpp"

#include <memory>

namespace radiant {

struct ModelConfig {
  Eigen::Index pose_code_dim = 16;
  std::vector<Eigen::Index> pose_net_dims{16, 32, 64, 96};
  std::vector<Eigen::Index> app_net_dims{64, 64, 96, 96};
  Eigen::Index fusion_heads = 3;
  Eigen::Index field_hidden = 128;
  int field_layers = 6;
  double pose_voxel = 0.02;
  double app_voxel = 0.02;
  double gamma = 0.05;   // surface-distance keep threshold
  int k_f = 3;           // key frames
  int m_c = 64, m_f = 64;
  int n_a = 4;           // surface samples per face
  int l_x = 10, l_d = 4;
  bool no_appearance = false;
  bool no_fusion = false;
  FusionMode fusion_mode = FusionMode::standard;

  Eigen::Index code_dim() const { return pose_net_dims.back(); }
  Eigen::Index app_dim() const { return app_net_dims.back(); }
  Eigen::Index xenc_dim() const { return 3 * (2 * l_x + 1); }
  Eigen::Index denc_dim() const { return 3 * (2 * l_d + 1); }
};

template <class S>
struct Model {
  ModelConfig cfg;
  ParamStore<S> params;
  Tensor<S> pose_codes;  // [N_m, pose_code_dim]
  SparseDiffusionNet<S> pose_net, app_net;
  Encoder<S> encoder;
  Decoder<S> decoder;
  AppearanceReduction<S> reduction;
  FusionParams<S> fusion;
  FieldNetwork<S> coarse, fine;

  static Model create(const ModelConfig& cfg, Eigen::Index n_vertices, uint64_t seed) {
    Model m;
    m.cfg = cfg;
    std::mt19937 rng{uint32_t(seed)};
    m.pose_codes = create_pose_codes(m.params, n_vertices, rng, cfg.pose_code_dim);
    m.pose_net = SparseDiffusionNet<S>::create(m.params, "pose_net", cfg.pose_net_dims, rng);
    m.app_net = SparseDiffusionNet<S>::create(m.params, "app_net", cfg.app_net_dims, rng);
    m.encoder = Encoder<S>::create(m.params, rng);
    m.decoder = Decoder<S>::create(m.params, rng);
    m.reduction = AppearanceReduction<S>::create(m.params, rng);
    m.fusion = FusionParams<S>::create(m.params, "fusion", cfg.code_dim(), cfg.fusion_heads, rng);
    Eigen::Index field_in = cfg.code_dim() + cfg.app_dim();
    m.coarse = FieldNetwork<S>::create(m.params, "field_coarse", field_in, cfg.xenc_dim(),
                                       cfg.denc_dim(), rng, cfg.field_hidden, cfg.field_layers);
    m.fine = FieldNetwork<S>::create(m.params, "field_fine", field_in, cfg.xenc_dim(),
                                     cfg.denc_dim(), rng, cfg.field_hidden, cfg.field_layers);
    return m;
  }
};

// Everything render_rays needs for one query frame: surface geometry, the
// frame's pose volume, key-frame volumes, and the appearance volume. Volumes
// for the key frames and the appearance path can be built detached (no graph)
// and reused across steps.
template <class S>
struct FrameContext {
  int frame_index = -1;
  const Frame* frame = nullptr;
  const BodyMesh* mesh = nullptr;
  SurfaceSampleSet samples;
  PointHashGrid grid;
  Aabb bounds;
  LatentVolume<S> pose_volume;
  std::vector<int> key_frames;
  std::vector<const BodyMesh*> key_meshes;
  std::vector<LatentVolume<S>> key_volumes;
  FeaturePyramid<S> pyramid;
  LatentVolume<S> app_volume;

  FrameContext() = default;
  FrameContext(const FrameContext&) = delete;  // grid points into samples
  FrameContext& operator=(const FrameContext&) = delete;

  // Drop any recorded graph so the context can be reused across training
  // steps (values become one refresh interval stale).
  void detach_aux() {
    if (!pose_volume.empty()) pose_volume.features = pose_volume.features.detach();
    for (auto& v : key_volumes)
      if (!v.empty()) v.features = v.features.detach();
    if (!app_volume.empty()) app_volume.features = app_volume.features.detach();
    if (pyramid.in_h > 0) pyramid.map = pyramid.map.detach();
  }
};

struct FrameContextOptions {
  bool detach_aux = true;  // build key-frame and appearance volumes outside the graph
  uint64_t sample_seed = 1;
};

template <class S>
LatentVolume<S> build_pose_volume(const Model<S>& model, const BodyMesh& mesh) {
  std::vector<Vec3> pts(size_t(mesh.vertex_count()));
  for (Eigen::Index i = 0; i < mesh.vertex_count(); ++i) pts[size_t(i)] = mesh.vertices.row(i);
  return model.pose_net.run(voxelize_codes(pts, model.pose_codes, model.cfg.pose_voxel));
}

template <class S>
std::unique_ptr<FrameContext<S>> build_frame_context(const Model<S>& model,
                                                     const SceneDataset& ds, int frame_index,
                                                     const FrameContextOptions& opts = {}) {
  auto ctx = std::make_unique<FrameContext<S>>();
  ctx->frame_index = frame_index;
  ctx->frame = &ds.frames[size_t(frame_index)];
  ctx->mesh = &ctx->frame->mesh;
  ctx->samples = sample_surface_points(*ctx->mesh, model.cfg.n_a, opts.sample_seed);
  ctx->grid = PointHashGrid(ctx->samples, model.cfg.gamma);
  ctx->bounds = ctx->mesh->bounds();

  ctx->pose_volume = build_pose_volume(model, *ctx->mesh);

  if (!model.cfg.no_fusion && model.cfg.k_f > 0) {
    std::vector<const BodyMesh*> train_meshes;
    for (int t : ds.train_frames) train_meshes.push_back(&ds.frames[size_t(t)].mesh);
    std::vector<int> picks = select_key_frames(*ctx->mesh, train_meshes);
    // 3 rotation slots by construction; repeat or trim to K_f.
    for (int j = 0; j < model.cfg.k_f; ++j)
      ctx->key_frames.push_back(ds.train_frames[size_t(picks[size_t(j % 3)])]);
    for (int t : ctx->key_frames) ctx->key_meshes.push_back(&ds.frames[size_t(t)].mesh);
    auto build_keys = [&] {
      for (const BodyMesh* km : ctx->key_meshes)
        ctx->key_volumes.push_back(build_pose_volume(model, *km));
    };
    if (opts.detach_aux) {
      NoGradGuard g;
      build_keys();
    } else {
      build_keys();
    }
  }

  auto build_app = [&] {
    const FrameView& view = ctx->frame->views[size_t(ds.input_view)];
    ArrayX<S> img(3 * view.rgb.height * view.rgb.width);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < view.rgb.height; ++y)
        for (int x = 0; x < view.rgb.width; ++x)
          img[(c * view.rgb.height + y) * view.rgb.width + x] = S(view.rgb.at(y, x, c));
    auto image = Tensor<S>::leaf({3, view.rgb.height, view.rgb.width}, std::move(img));
    ctx->pyramid = model.encoder(image);
    if (!model.cfg.no_appearance)
      ctx->app_volume = build_appearance_volume(*ctx->frame, ds.input_view, ds.input_camera(),
                                                ctx->pyramid, model.reduction, model.app_net,
                                                model.cfg.app_voxel, &ctx->grid);
  };
  if (opts.detach_aux) {
    NoGradGuard g;
    build_app();
  } else {
    build_app();
  }
  return ctx;
}

namespace detail {

// Field evaluation over the kept samples of a ray batch: query codes, fuse
// across key frames, positionally encode, run the field network, and scatter
// back into the dense [R*M] layout (dropped samples keep sigma = 0, c = 0).
template <class S>
std::pair<Tensor<S>, Tensor<S>> eval_field(const Model<S>& model, const FrameContext<S>& ctx,
                                           const std::vector<Vec3>& points,
                                           const std::vector<Vec3>& dirs,
                                           const FieldNetwork<S>& net) {
  Eigen::Index total = Eigen::Index(points.size());
  std::vector<uint8_t> keep = filter_samples(points, ctx.grid, model.cfg.gamma);
  std::vector<Eigen::Index> kept_idx;
  std::vector<Vec3> kept;
  for (Eigen::Index i = 0; i < total; ++i)
    if (keep[size_t(i)]) {
      kept_idx.push_back(i);
      kept.push_back(points[size_t(i)]);
    }
  if (kept.empty())
    return {Tensor<S>::zeros({total, 1}), Tensor<S>::zeros({total, 3})};
  Eigen::Index K = Eigen::Index(kept.size());

  Tensor<S> phi = query_code(ctx.pose_volume, kept, model.cfg.code_dim());
  Tensor<S> fused = phi;
  if (!model.cfg.no_fusion && !ctx.key_volumes.empty()) {
    Eigen::Index n_tokens = Eigen::Index(ctx.key_volumes.size()) + 1;
    std::vector<Tensor<S>> stacked{phi};
    for (size_t j = 0; j < ctx.key_volumes.size(); ++j) {
      std::vector<Vec3> tracked(size_t(K), Vec3::Zero());
      for (Eigen::Index i = 0; i < K; ++i) {
        SurfaceAnchor a = ctx.grid.nearest(kept[size_t(i)]).anchor;
        tracked[size_t(i)] = track_point(a, *ctx.mesh, *ctx.key_meshes[j]);
      }
      stacked.push_back(query_code(ctx.key_volumes[j], tracked, model.cfg.code_dim()));
    }
    std::vector<Eigen::Index> interleave(size_t(K * n_tokens));
    for (Eigen::Index p = 0; p < K; ++p)
      for (Eigen::Index j = 0; j < n_tokens; ++j)
        interleave[size_t(p * n_tokens + j)] = j * K + p;
    Tensor<S> tokens = gather_rows(concat(stacked, 0), interleave);
    fused = fuse_codes(tokens, model.fusion, n_tokens, model.cfg.fusion_mode);
  }

  Tensor<S> psi = model.cfg.no_appearance || ctx.app_volume.empty()
                      ? Tensor<S>::zeros({K, model.cfg.app_dim()})
                      : query_code(ctx.app_volume, kept, model.cfg.app_dim());

  ArrayX<S> xv(K * 3), dv(K * 3);
  for (Eigen::Index i = 0; i < K; ++i)
    for (int c = 0; c < 3; ++c) {
      xv[i * 3 + c] = S(kept[size_t(i)][c]);
      dv[i * 3 + c] = S(dirs[size_t(kept_idx[size_t(i)])][c]);
    }
  Tensor<S> xe = positional_encode(Tensor<S>::leaf({K, 3}, std::move(xv)), model.cfg.l_x);
  Tensor<S> de = positional_encode(Tensor<S>::leaf({K, 3}, std::move(dv)), model.cfg.l_d);
  std::vector<Tensor<S>> cat{fused, psi};
  auto [sigma, color] = net(concat(cat, 1), xe, de);
  return {scatter_rows(sigma, kept_idx, total), scatter_rows(color, kept_idx, total)};
}

// Deterministic per-(frame, pixel) stream.
inline std::mt19937 pixel_rng(uint64_t seed, int frame, double u, double v) {
  uint64_t h = seed * 0x9e3779b97f4a7c15ull;
  h ^= uint64_t(frame) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  h ^= uint64_t(int64_t(u * 8 + 0.5)) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  h ^= uint64_t(int64_t(v * 8 + 0.5)) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return std::mt19937{uint32_t(h ^ (h >> 32))};
}

}  // namespace detail

struct RenderOptions {
  bool jitter = true;
  uint64_t seed = 1;
};

template <class S>
struct RayBatchResult {
  Tensor<S> coarse;  // [R, 3]
  Tensor<S> fine;    // [R, 3]
};

template <class S>
RayBatchResult<S> render_rays(const Model<S>& model, const FrameContext<S>& ctx,
                              const Camera& camera,
                              const std::vector<std::pair<double, double>>& pixels,
                              const RenderOptions& opts = {}) {
  std::vector<Ray> rays = generate_rays(camera, pixels, ctx.bounds);
  Eigen::Index R = Eigen::Index(rays.size());
  int Mc = model.cfg.m_c, Mf = model.cfg.m_f;

  std::vector<std::mt19937> rngs;
  rngs.reserve(size_t(R));
  for (size_t i = 0; i < pixels.size(); ++i)
    rngs.push_back(detail::pixel_rng(opts.seed, ctx.frame_index, pixels[i].first,
                                     pixels[i].second));

  std::vector<double> depths_c(size_t(R * Mc));
  std::vector<double> fars(size_t(R), 0.0);
  std::vector<Vec3> pts_c(size_t(R * Mc)), dirs_c(size_t(R * Mc));
  for (Eigen::Index r = 0; r < R; ++r) {
    auto d = stratified_samples(rays[size_t(r)].near, rays[size_t(r)].far, Mc,
                                opts.jitter ? &rngs[size_t(r)] : nullptr);
    fars[size_t(r)] = rays[size_t(r)].far;
    for (int i = 0; i < Mc; ++i) {
      size_t k = size_t(r * Mc + i);
      depths_c[k] = d[size_t(i)];
      pts_c[k] = rays[size_t(r)].origin + d[size_t(i)] * rays[size_t(r)].direction;
      dirs_c[k] = rays[size_t(r)].direction;
    }
  }

  auto [sig_c, col_c] = detail::eval_field(model, ctx, pts_c, dirs_c, model.coarse);
  MatX<S> weights;
  Tensor<S> coarse = composite_rays(sig_c, col_c, depths_c, fars, Mc, &weights);

  int Mt = Mc + Mf;
  std::vector<double> depths_f(size_t(R * Mt));
  std::vector<Vec3> pts_f(size_t(R * Mt)), dirs_f(size_t(R * Mt));
  for (Eigen::Index r = 0; r < R; ++r) {
    std::vector<double> dc(depths_c.begin() + r * Mc, depths_c.begin() + (r + 1) * Mc);
    std::vector<double> w(size_t(Mc), 0.0);
    for (int i = 0; i < Mc; ++i) w[size_t(i)] = double(weights(r, i));
    auto d = importance_samples(dc, w, Mf, rngs[size_t(r)]);
    // Strictly increasing depths are required by the quadrature; nudge ties
    // produced by duplicate inverse-CDF hits.
    for (size_t i = 1; i < d.size(); ++i)
      if (d[i] <= d[i - 1]) d[i] = std::nextafter(d[i - 1], 1e300);
    for (int i = 0; i < Mt; ++i) {
      size_t k = size_t(r * Mt + i);
      depths_f[k] = d[size_t(i)];
      pts_f[k] = rays[size_t(r)].origin + d[size_t(i)] * rays[size_t(r)].direction;
      dirs_f[k] = rays[size_t(r)].direction;
    }
  }

  auto [sig_f, col_f] = detail::eval_field(model, ctx, pts_f, dirs_f, model.fine);
  Tensor<S> fine = composite_rays(sig_f, col_f, depths_f, fars, Mt);
  return {coarse, fine};
}

// Full-frame render from the fine network; no graph is recorded.
template <class S>
ImageRGB render_image(const Model<S>& model, const FrameContext<S>& ctx, const Camera& camera,
                      const RenderOptions& opts = {}, Eigen::Index batch = 2048) {
  NoGradGuard guard;
  ImageRGB img(camera.height, camera.width);
  std::vector<std::pair<double, double>> pixels;
  pixels.reserve(size_t(camera.width) * size_t(camera.height));
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) pixels.push_back({x + 0.5, y + 0.5});
  for (size_t start = 0; start < pixels.size(); start += size_t(batch)) {
    size_t n = std::min(size_t(batch), pixels.size() - start);
    std::vector<std::pair<double, double>> chunk(pixels.begin() + long(start),
                                                 pixels.begin() + long(start + n));
    auto out = render_rays(model, ctx, camera, chunk, opts);
    auto m = out.fine.mat();
    for (size_t i = 0; i < n; ++i) {
      size_t p = start + i;
      int y = int(p) / camera.width, x = int(p) % camera.width;
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = std::clamp(float(m(Eigen::Index(i), c)), 0.f, 1.f);
    }
  }
  return img;
}

}  // namespace radiant
