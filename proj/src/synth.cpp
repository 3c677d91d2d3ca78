#include "radiant/synth.hpp"

#include <Eigen/Geometry>
#include <json.hpp>

#include <fstream>
#include <random>

namespace radiant {

namespace {

struct Bone {
  std::string name;
  int parent = -1;
  Vec3 rest_a, rest_b;  // proximal/distal joint positions in rest pose
  double radius = 0.05;
  Eigen::Vector3f albedo;
  // Animation: local rotation about the proximal joint, axis and a
  // sinusoid angle(t) = amp * sin(2*pi*freq*t/N + phase).
  Vec3 swing_axis = Vec3::UnitX();
  double amp = 0, freq = 1, phase = 0;
};

std::vector<Bone> build_skeleton(std::mt19937& rng) {
  std::uniform_real_distribution<double> ph(0.0, 2 * M_PI);
  auto color = [](float r, float g, float b) { return Eigen::Vector3f(r, g, b); };
  std::vector<Bone> bones;
  auto add = [&](std::string name, int parent, Vec3 a, Vec3 b, double r, Eigen::Vector3f alb,
                 Vec3 axis, double amp, double freq) {
    Bone bone;
    bone.name = std::move(name);
    bone.parent = parent;
    bone.rest_a = a;
    bone.rest_b = b;
    bone.radius = r;
    bone.albedo = alb;
    bone.swing_axis = axis.normalized();
    bone.amp = amp;
    bone.freq = freq;
    bone.phase = ph(rng);
    bones.push_back(bone);
    return int(bones.size()) - 1;
  };
  int torso = add("torso", -1, {0, 0.90, 0}, {0, 1.42, 0}, 0.13, color(0.75f, 0.25f, 0.2f),
                  Vec3::UnitY(), 0.12, 1);
  add("head", torso, {0, 1.42, 0}, {0, 1.68, 0}, 0.09, color(0.9f, 0.75f, 0.6f), Vec3::UnitX(),
      0.25, 2);
  int lua = add("upper_arm_l", torso, {0.16, 1.36, 0}, {0.42, 1.30, 0}, 0.05,
                color(0.2f, 0.5f, 0.8f), Vec3::UnitZ(), 0.55, 1);
  add("forearm_l", lua, {0.42, 1.30, 0}, {0.66, 1.26, 0}, 0.04, color(0.9f, 0.75f, 0.6f),
      Vec3::UnitZ(), 0.6, 2);
  int rua = add("upper_arm_r", torso, {-0.16, 1.36, 0}, {-0.42, 1.30, 0}, 0.05,
                color(0.2f, 0.5f, 0.8f), Vec3::UnitZ(), 0.55, 1);
  add("forearm_r", rua, {-0.42, 1.30, 0}, {-0.66, 1.26, 0}, 0.04, color(0.9f, 0.75f, 0.6f),
      Vec3::UnitZ(), 0.6, 2);
  int lth = add("thigh_l", -1, {0.09, 0.90, 0}, {0.09, 0.48, 0}, 0.07, color(0.25f, 0.3f, 0.55f),
                Vec3::UnitX(), 0.5, 1);
  add("shin_l", lth, {0.09, 0.48, 0}, {0.09, 0.07, 0}, 0.05, color(0.25f, 0.3f, 0.55f),
      Vec3::UnitX(), 0.45, 1);
  int rth = add("thigh_r", -1, {-0.09, 0.90, 0}, {-0.09, 0.48, 0}, 0.07, color(0.25f, 0.3f, 0.55f),
                Vec3::UnitX(), 0.5, 1);
  add("shin_r", rth, {-0.09, 0.48, 0}, {-0.09, 0.07, 0}, 0.05, color(0.25f, 0.3f, 0.55f),
      Vec3::UnitX(), 0.45, 1);
  // Left/right legs swing in opposition.
  bones[6].phase = 0.0;
  bones[7].phase = 0.6;
  bones[8].phase = M_PI;
  bones[9].phase = M_PI + 0.6;
  return bones;
}

struct RestMesh {
  Eigen::Matrix<double, Eigen::Dynamic, 3> vertices;
  Eigen::Matrix<int, Eigen::Dynamic, 3> faces;
  std::vector<int> vertex_bone;
  std::vector<Eigen::Vector3f> vertex_color;
};

// Capsule around segment a-b: tube rings plus hemispherical caps. Vertex
// colours carry the albedo modulated by a cloth-wrinkle pattern in the
// capsule's local cylindrical coordinates.
void append_capsule(RestMesh& mesh, const Bone& bone, int bone_id, const SynthConfig& cfg) {
  Vec3 axis = (bone.rest_b - bone.rest_a).normalized();
  Vec3 ref = std::abs(axis.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX();
  Vec3 u = axis.cross(ref).normalized();
  Vec3 v = axis.cross(u);
  double len = (bone.rest_b - bone.rest_a).norm();
  int seg = cfg.segments;

  std::vector<double> ring_t;      // position along the axis, in [-r, len+r]
  std::vector<double> ring_rad;    // ring radius
  for (int i = cfg.cap_rings; i >= 1; --i) {
    double a = M_PI / 2 * i / cfg.cap_rings;
    ring_t.push_back(-bone.radius * std::sin(a));
    ring_rad.push_back(bone.radius * std::cos(a));
  }
  for (int i = 0; i <= cfg.side_rings; ++i) {
    ring_t.push_back(len * i / cfg.side_rings);
    ring_rad.push_back(bone.radius);
  }
  for (int i = 1; i <= cfg.cap_rings; ++i) {
    double a = M_PI / 2 * i / cfg.cap_rings;
    ring_t.push_back(len + bone.radius * std::sin(a));
    ring_rad.push_back(bone.radius * std::cos(a));
  }

  int base = int(mesh.vertices.rows());
  int nrings = int(ring_t.size());
  Eigen::Index new_verts = Eigen::Index(nrings) * seg + 2;
  mesh.vertices.conservativeResize(base + new_verts, 3);

  auto wrinkle = [&](double along, double angle) {
    double w = 0.82 + 0.18 * std::sin(34.0 * along / (len + 2 * bone.radius) + bone.phase) *
                          std::sin(3.0 * angle + 2.0 * bone.phase);
    return float(w);
  };

  for (int r = 0; r < nrings; ++r)
    for (int s = 0; s < seg; ++s) {
      double ang = 2 * M_PI * s / seg;
      Vec3 p = bone.rest_a + axis * ring_t[size_t(r)] +
               ring_rad[size_t(r)] * (std::cos(ang) * u + std::sin(ang) * v);
      mesh.vertices.row(base + r * seg + s) = p;
      mesh.vertex_bone.push_back(bone_id);
      mesh.vertex_color.push_back(bone.albedo * wrinkle(ring_t[size_t(r)] + bone.radius, ang));
    }
  int tip_a = base + nrings * seg;      // bottom pole
  int tip_b = tip_a + 1;                // top pole
  mesh.vertices.row(tip_a) = (bone.rest_a - axis * bone.radius).transpose();
  mesh.vertices.row(tip_b) = (bone.rest_b + axis * bone.radius).transpose();
  mesh.vertex_bone.push_back(bone_id);
  mesh.vertex_color.push_back(bone.albedo * wrinkle(0.0, 0.0));
  mesh.vertex_bone.push_back(bone_id);
  mesh.vertex_color.push_back(bone.albedo * wrinkle(len + 2 * bone.radius, 0.0));

  std::vector<Eigen::Vector3i> faces;
  for (int r = 0; r + 1 < nrings; ++r)
    for (int s = 0; s < seg; ++s) {
      int s1 = (s + 1) % seg;
      int a0 = base + r * seg + s, a1 = base + r * seg + s1;
      int b0 = a0 + seg, b1 = a1 + seg;
      faces.push_back({a0, b0, a1});
      faces.push_back({a1, b0, b1});
    }
  for (int s = 0; s < seg; ++s) {
    int s1 = (s + 1) % seg;
    faces.push_back({tip_a, base + s, base + s1});
    int top = base + (nrings - 1) * seg;
    faces.push_back({tip_b, top + s1, top + s});
  }
  Eigen::Index fbase = mesh.faces.rows();
  mesh.faces.conservativeResize(fbase + Eigen::Index(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) mesh.faces.row(fbase + Eigen::Index(i)) = faces[i];
}

struct PosedFrame {
  BodyMesh mesh;
  std::map<std::string, double> pose;
};

PosedFrame pose_frame(const std::vector<Bone>& bones, const RestMesh& rest, int t, int n_frames,
                      double yaw_turns) {
  // Global yaw sweeps the body around the vertical axis over the sequence, so
  // the pose distribution covers all orientations.
  double yaw = 2 * M_PI * yaw_turns * t / std::max(1, n_frames);
  Eigen::Affine3d root = Eigen::Affine3d::Identity();
  root.rotate(Eigen::AngleAxisd(yaw, Vec3::UnitY()));

  PosedFrame out;
  out.pose["root_yaw"] = yaw;
  std::vector<Eigen::Affine3d> world(bones.size());
  for (size_t b = 0; b < bones.size(); ++b) {
    const Bone& bone = bones[b];
    double angle = bone.amp * std::sin(2 * M_PI * bone.freq * t / std::max(1, n_frames) + bone.phase);
    out.pose[bone.name] = angle;
    Eigen::Affine3d local = Eigen::Translation3d(bone.rest_a) *
                            Eigen::AngleAxisd(angle, bone.swing_axis) *
                            Eigen::Translation3d(-bone.rest_a);
    world[b] = (bone.parent >= 0 ? world[size_t(bone.parent)] : root) * local;
  }
  out.mesh.vertices.resize(rest.vertices.rows(), 3);
  for (Eigen::Index i = 0; i < rest.vertices.rows(); ++i)
    out.mesh.vertices.row(i) =
        (world[size_t(rest.vertex_bone[size_t(i)])] * Vec3(rest.vertices.row(i))).transpose();
  out.mesh.faces = rest.faces;
  return out;
}

// Rasterizing ray-caster: for each triangle, test the pixel rays inside its
// projected bounding box and keep the nearest hit per pixel.
void render_view(const BodyMesh& mesh, const std::vector<Eigen::Vector3f>& vcolor,
                 const Camera& cam, FrameView& out) {
  int W = cam.width, H = cam.height;
  out.rgb = ImageRGB(H, W);
  out.depth = ImageGray(H, W, 0.f);
  out.mask = ImageGray(H, W, 0.f);
  ImageGray tbuf(H, W, std::numeric_limits<float>::infinity());
  Vec3 origin = cam.center();
  Vec3 light = Vec3(0.4, 1.0, 0.45).normalized();

  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    auto idx = mesh.faces.row(f);
    Vec3 a = mesh.vertices.row(idx[0]), b = mesh.vertices.row(idx[1]),
         c = mesh.vertices.row(idx[2]);
    Vec3 pa = cam.project(a), pb = cam.project(b), pc = cam.project(c);
    if (pa.z() <= 0 || pb.z() <= 0 || pc.z() <= 0) continue;
    int x0 = std::max(0, int(std::floor(std::min({pa.x(), pb.x(), pc.x()}) - 1)));
    int x1 = std::min(W - 1, int(std::ceil(std::max({pa.x(), pb.x(), pc.x()}) + 1)));
    int y0 = std::max(0, int(std::floor(std::min({pa.y(), pb.y(), pc.y()}) - 1)));
    int y1 = std::min(H - 1, int(std::ceil(std::max({pa.y(), pb.y(), pc.y()}) + 1)));
    if (x0 > x1 || y0 > y1) continue;
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 face_n = e1.cross(e2).normalized();
    float shade = float(0.35 + 0.65 * std::max(0.0, face_n.dot(light)));

    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        Vec3 dir = cam.pixel_direction(x + 0.5, y + 0.5);
        Vec3 p = dir.cross(e2);
        double det = e1.dot(p);
        if (std::abs(det) < 1e-14) continue;
        double inv = 1.0 / det;
        Vec3 s = origin - a;
        double bu = s.dot(p) * inv;
        if (bu < 0 || bu > 1) continue;
        Vec3 q = s.cross(e1);
        double bv = dir.dot(q) * inv;
        if (bv < 0 || bu + bv > 1) continue;
        double t = e2.dot(q) * inv;
        if (t <= 1e-6) continue;
        if (float(t) >= tbuf.at(y, x)) continue;
        tbuf.at(y, x) = float(t);
        Vec3 hit = origin + t * dir;
        out.depth.at(y, x) = float(cam.to_camera(hit).z());
        out.mask.at(y, x) = 1.f;
        Eigen::Vector3f col = float(1.0 - bu - bv) * vcolor[size_t(idx[0])] +
                              float(bu) * vcolor[size_t(idx[1])] + float(bv) * vcolor[size_t(idx[2])];
        col *= shade;
        for (int ch = 0; ch < 3; ++ch)
          out.rgb.at(y, x, ch) = std::min(1.f, std::max(0.f, col[ch]));
      }
  }
}

}  // namespace

void SynthConfig::validate() const {
  std::vector<std::string> bad;
  if (frames < 1) bad.push_back("frames");
  if (views < 1) bad.push_back("views");
  if (width < 8 || width % 4) bad.push_back("width");
  if (height < 8 || height % 4) bad.push_back("height");
  if (test_frames < 0 || test_frames >= frames) bad.push_back("test_frames");
  if (segments < 3) bad.push_back("segments");
  if (side_rings < 1) bad.push_back("side_rings");
  if (cap_rings < 1) bad.push_back("cap_rings");
  if (camera_radius <= 0) bad.push_back("camera_radius");
  if (appearance_jitter < 0 || appearance_jitter > 1) bad.push_back("appearance_jitter");
  if (!bad.empty()) {
    std::string msg = "invalid synthetic scene config, offending fields:";
    for (auto& f : bad) msg += " " + f;
    throw std::invalid_argument(msg);
  }
}

SynthConfig synth_config_from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j = nlohmann::json::parse(is);
  SynthConfig cfg;
  cfg.frames = j.value("frames", cfg.frames);
  cfg.views = j.value("views", cfg.views);
  cfg.width = j.value("width", cfg.width);
  cfg.height = j.value("height", cfg.height);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.test_frames = j.value("test_frames", cfg.test_frames);
  cfg.segments = j.value("segments", cfg.segments);
  cfg.side_rings = j.value("side_rings", cfg.side_rings);
  cfg.cap_rings = j.value("cap_rings", cfg.cap_rings);
  cfg.camera_radius = j.value("camera_radius", cfg.camera_radius);
  cfg.camera_height = j.value("camera_height", cfg.camera_height);
  cfg.yaw_turns = j.value("yaw_turns", cfg.yaw_turns);
  cfg.appearance_jitter = j.value("appearance_jitter", cfg.appearance_jitter);
  cfg.validate();
  return cfg;
}

SceneDataset generate_synthetic_scene(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937 rng(uint32_t(cfg.seed));
  auto bones = build_skeleton(rng);
  RestMesh rest;
  for (size_t b = 0; b < bones.size(); ++b) append_capsule(rest, bones[b], int(b), cfg);

  SceneDataset ds;
  Vec3 target(0, 0.9, 0);
  for (int v = 0; v < cfg.views; ++v) {
    // Cameras on a ring, slightly staggered in height; view 0 is the static
    // input view shared by every frame.
    double ang = 2 * M_PI * v / cfg.views;
    double h = cfg.camera_height + 0.25 * std::sin(1.7 * v + 0.5);
    Vec3 pos(cfg.camera_radius * std::sin(ang), h, cfg.camera_radius * std::cos(ang));
    Camera cam;
    cam.width = cfg.width;
    cam.height = cfg.height;
    cam.fx = cam.fy = 1.1 * cfg.width;
    cam.cx = cfg.width / 2.0;
    cam.cy = cfg.height / 2.0;
    // look-at: camera z axis towards the target, y roughly down-up.
    Vec3 z = (target - pos).normalized();
    Vec3 x = Vec3::UnitY().cross(z).normalized();
    Vec3 y = z.cross(x);
    Eigen::Matrix3d r_wc;
    r_wc.row(0) = x.transpose();
    r_wc.row(1) = -y.transpose();  // image v grows downward
    r_wc.row(2) = z.transpose();
    cam.rotation = r_wc;
    cam.translation = -r_wc * pos;
    ds.cameras.push_back(cam);
  }
  ds.input_view = 0;
  for (int v = 0; v < cfg.views; ++v) ds.train_views.push_back(v);
  for (int t = 0; t < cfg.frames; ++t)
    (t < cfg.frames - cfg.test_frames ? ds.train_frames : ds.test_frames).push_back(t);

  for (int t = 0; t < cfg.frames; ++t) {
    PosedFrame pf = pose_frame(bones, rest, t, cfg.frames, cfg.yaw_turns);
    Frame frame;
    frame.index = t;
    frame.mesh = pf.mesh;
    frame.mesh.frame_index = t;
    frame.pose = pf.pose;
    frame.views.resize(size_t(cfg.views));
    // Optional per-frame tint so the appearance of a frame is not derivable
    // from its pose alone.
    std::vector<Eigen::Vector3f> colors = rest.vertex_color;
    if (cfg.appearance_jitter > 0) {
      std::mt19937 crng(uint32_t(cfg.seed * 9176u + uint32_t(t) * 131u + 7u));
      std::uniform_real_distribution<float> jt(float(1.0 - cfg.appearance_jitter),
                                               float(1.0 + cfg.appearance_jitter));
      Eigen::Vector3f tint(jt(crng), jt(crng), jt(crng));
      for (auto& c : colors) c = c.cwiseProduct(tint);
    }
    for (int v = 0; v < cfg.views; ++v)
      render_view(pf.mesh, colors, ds.cameras[size_t(v)], frame.views[size_t(v)]);
    ds.frames.push_back(std::move(frame));
  }
  return ds;
}

SceneDataset generate_synthetic_scene(const SynthConfig& cfg, const std::string& out_dir) {
  SceneDataset ds = generate_synthetic_scene(cfg);
  save_dataset(out_dir, ds);
  return ds;
}

}  // namespace radiant
