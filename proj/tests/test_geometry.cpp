#include "radiant/mesh.hpp"
#include <Eigen/Geometry>
#include "radiant/synth.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace radiant;

namespace {

BodyMesh single_triangle() {
  BodyMesh m;
  m.vertices.resize(3, 3);
  m.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  m.faces.resize(1, 3);
  m.faces << 0, 1, 2;
  m.frame_index = 0;
  return m;
}

BodyMesh translated(const BodyMesh& m, const Vec3& d) {
  BodyMesh out = m;
  out.vertices.rowwise() += d.transpose();
  return out;
}

// Exact point-to-triangle distance (closest-point clamping), test-local oracle.
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();
  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + d1 / (d1 - d3) * ab)).norm();
  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + d2 / (d2 - d6) * ac)).norm();
  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return (p - (b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b))).norm();
  double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * vb * denom + ac * vc * denom)).norm();
}

double point_mesh_distance(const Vec3& p, const BodyMesh& m) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index f = 0; f < m.face_count(); ++f) {
    auto idx = m.faces.row(f);
    best = std::min(best, point_triangle_distance(p, m.vertices.row(idx[0]).transpose(),
                                                  m.vertices.row(idx[1]).transpose(),
                                                  m.vertices.row(idx[2]).transpose()));
  }
  return best;
}

}  // namespace

TEST_CASE("surface sample lies inside its triangle") {
  auto mesh = single_triangle();
  auto set = sample_surface_points(mesh, 1, 7);
  REQUIRE(set.size() == 1);
  const auto& a = set.anchors[0];
  CHECK(a.bary.minCoeff() >= 0.0);
  CHECK(a.bary.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((set.points[0] - anchor_point(a, mesh)).norm() < 1e-6);
}

TEST_CASE("sample count is faces times N_a") {
  SynthConfig cfg;
  cfg.frames = 1;
  cfg.views = 1;
  cfg.width = 16;
  cfg.height = 16;
  auto scene = generate_synthetic_scene(cfg);
  const auto& mesh = scene.frames[0].mesh;
  auto set = sample_surface_points(mesh, 4, 1);
  CHECK(Eigen::Index(set.size()) == mesh.face_count() * 4);
}

TEST_CASE("sample mean over 1e4 points approaches the triangle centroid") {
  auto mesh = single_triangle();
  auto set = sample_surface_points(mesh, 10000, 3);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : set.points) mean += p;
  mean /= double(set.size());
  Vec3 centroid(1.0 / 3, 1.0 / 3, 0.0);
  CHECK((mean - centroid).norm() < 0.02);  // 2% of unit edge length
}

TEST_CASE("degenerate faces sample at the centroid with a warning count") {
  BodyMesh m = single_triangle();
  m.vertices.row(2) = m.vertices.row(0);  // collapse
  auto set = sample_surface_points(m, 2, 1);
  CHECK(set.degenerate_faces == 1);
  for (const auto& a : set.anchors)
    CHECK((a.bary - Vec3::Constant(1.0 / 3)).norm() < 1e-12);
}

TEST_CASE("nearest query on an exact sample returns distance zero") {
  auto mesh = single_triangle();
  auto set = sample_surface_points(mesh, 8, 5);
  PointHashGrid grid(set, 0.02);
  auto r = grid.nearest(set.points[3]);
  CHECK(r.distance == doctest::Approx(0.0));
  CHECK(r.sample_index == 3);
}

TEST_CASE("nearest distance from an offset above a flat patch is the offset") {
  auto mesh = single_triangle();
  auto set = sample_surface_points(mesh, 2000, 5);
  PointHashGrid grid(set, 0.05);
  Vec3 x(0.33, 0.33, 0.3);  // 0.3 along the normal of the z=0 triangle
  auto r = grid.nearest(x);
  CHECK(r.distance == doctest::Approx(0.3).epsilon(0.01));
}

TEST_CASE("hash-grid nearest matches the brute-force scan") {
  SynthConfig cfg;
  cfg.frames = 1;
  cfg.views = 1;
  cfg.width = 16;
  cfg.height = 16;
  auto scene = generate_synthetic_scene(cfg);
  auto set = sample_surface_points(scene.frames[0].mesh, 2, 9);
  PointHashGrid grid(set, 0.02);
  std::mt19937 rng(13);
  auto b = scene.frames[0].mesh.bounds().expanded(0.3);
  std::uniform_real_distribution<double> ux(b.lo.x(), b.hi.x()), uy(b.lo.y(), b.hi.y()),
      uz(b.lo.z(), b.hi.z());
  for (int i = 0; i < 200; ++i) {
    Vec3 x(ux(rng), uy(rng), uz(rng));
    auto fast = grid.nearest(x);
    auto slow = nearest_surface_point_bruteforce(x, set);
    CHECK(fast.distance == doctest::Approx(slow.distance).epsilon(1e-12));
    CHECK(fast.sample_index == slow.sample_index);
  }
}

TEST_CASE("filter keeps points inside gamma and drops points beyond it") {
  auto mesh = single_triangle();
  auto set = sample_surface_points(mesh, 3000, 5);
  PointHashGrid grid(set, 0.05);
  double gamma = 0.05;
  std::vector<Vec3> pts{{0.3, 0.3, gamma / 2}, {0.3, 0.3, 2 * gamma}};
  auto keep = filter_samples(pts, grid, gamma);
  CHECK(keep[0] == 1);
  CHECK(keep[1] == 0);
}

TEST_CASE("filter matches the brute-force distance field on a synthetic frame") {
  SynthConfig cfg;
  cfg.frames = 1;
  cfg.views = 1;
  cfg.width = 16;
  cfg.height = 16;
  auto scene = generate_synthetic_scene(cfg);
  auto set = sample_surface_points(scene.frames[0].mesh, 4, 2);
  PointHashGrid grid(set, 0.05);
  std::mt19937 rng(19);
  auto b = scene.frames[0].mesh.bounds().expanded(0.2);
  std::uniform_real_distribution<double> ux(b.lo.x(), b.hi.x()), uy(b.lo.y(), b.hi.y()),
      uz(b.lo.z(), b.hi.z());
  std::vector<Vec3> pts;
  for (int i = 0; i < 300; ++i) pts.push_back({ux(rng), uy(rng), uz(rng)});
  auto keep = filter_samples(pts, grid, 0.05);
  for (size_t i = 0; i < pts.size(); ++i) {
    bool expect = nearest_surface_point_bruteforce(pts[i], set).distance < 0.05;
    CHECK(bool(keep[i]) == expect);
  }
}

TEST_CASE("filter extremes: huge gamma keeps all, tiny gamma keeps none") {
  auto mesh = single_triangle();
  auto set = sample_surface_points(mesh, 100, 5);
  PointHashGrid grid(set, 0.05);
  std::vector<Vec3> pts{{0.2, 0.2, 0.1}, {0.5, 0.1, -0.2}};
  auto all = filter_samples(pts, grid, 1e9);
  auto none = filter_samples(pts, grid, 1e-9);
  CHECK((all[0] && all[1]));
  CHECK((!none[0] && !none[1]));
  CHECK_THROWS_AS(filter_samples(pts, grid, 0.0), std::invalid_argument);
}

TEST_CASE("tracking to the same frame is the identity") {
  auto mesh = single_triangle();
  auto set = sample_surface_points(mesh, 4, 7);
  for (size_t i = 0; i < set.size(); ++i)
    CHECK((track_point(set.anchors[i], mesh, mesh) - set.points[i]).norm() < 1e-12);
}

TEST_CASE("tracking through a rigid translation shifts the point") {
  auto mesh = single_triangle();
  auto moved = translated(mesh, {1, 0, 0});
  auto set = sample_surface_points(mesh, 4, 7);
  for (size_t i = 0; i < set.size(); ++i) {
    Vec3 t = track_point(set.anchors[i], mesh, moved);
    CHECK((t - (set.points[i] + Vec3(1, 0, 0))).norm() < 1e-12);
  }
}

TEST_CASE("tracking through articulated motion stays on the target surface") {
  SynthConfig cfg;
  cfg.frames = 3;
  cfg.views = 1;
  cfg.width = 16;
  cfg.height = 16;
  auto scene = generate_synthetic_scene(cfg);
  auto set = sample_surface_points(scene.frames[0].mesh, 1, 11);
  std::mt19937 rng(5);
  std::uniform_int_distribution<size_t> pick(0, set.size() - 1);
  for (int i = 0; i < 50; ++i) {
    size_t s = pick(rng);
    Vec3 t = track_point(set.anchors[s], scene.frames[0].mesh, scene.frames[2].mesh);
    CHECK(point_mesh_distance(t, scene.frames[2].mesh) < 1e-6);
  }
}

TEST_CASE("tracking rejects topology mismatches") {
  auto mesh = single_triangle();
  BodyMesh other;
  other.vertices.resize(4, 3);
  other.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  other.faces.resize(2, 3);
  other.faces << 0, 1, 2, 0, 1, 3;
  auto set = sample_surface_points(mesh, 1, 7);
  CHECK_THROWS_AS(track_point(set.anchors[0], mesh, other), std::invalid_argument);
}

TEST_CASE("key-frame slot picks the exact rotated pose when present") {
  SynthConfig cfg;
  cfg.frames = 2;
  cfg.views = 1;
  cfg.width = 16;
  cfg.height = 16;
  auto scene = generate_synthetic_scene(cfg);
  const auto& query = scene.frames[0].mesh;
  Vec3 c = query.centroid();
  Eigen::Matrix3d rot = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitY()).toRotationMatrix();
  BodyMesh rotated = query;
  for (Eigen::Index i = 0; i < query.vertex_count(); ++i)
    rotated.vertices.row(i) = (rot * (query.vertices.row(i).transpose() - c) + c).transpose();
  std::vector<const BodyMesh*> training{&scene.frames[1].mesh, &rotated};
  auto idx = select_key_frames(query, training);
  CHECK(idx[0] == 1);
  CHECK(key_frame_distances(query, training)(0, 1) < 1e-9);
}

TEST_CASE("a single training frame fills all three key-frame slots") {
  auto mesh = single_triangle();
  std::vector<const BodyMesh*> training{&mesh};
  auto idx = select_key_frames(mesh, training);
  CHECK(idx == std::vector<int>{0, 0, 0});
}

TEST_CASE("key-frame selection matches exhaustive distance computation") {
  SynthConfig cfg;
  cfg.frames = 20;
  cfg.views = 1;
  cfg.width = 16;
  cfg.height = 16;
  auto scene = generate_synthetic_scene(cfg);
  const auto& query = scene.frames[7].mesh;
  std::vector<const BodyMesh*> training;
  for (int t = 0; t < 20; ++t)
    if (t != 7) training.push_back(&scene.frames[size_t(t)].mesh);
  auto idx = select_key_frames(query, training);
  Vec3 qc = query.centroid();
  for (int r = 0; r < 3; ++r) {
    double angle = M_PI / 2 * (r + 1);
    Eigen::Matrix3d rot = Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
    Eigen::Matrix<double, Eigen::Dynamic, 3> rq = query.vertices;
    for (Eigen::Index i = 0; i < rq.rows(); ++i)
      rq.row(i) = (rot * (query.vertices.row(i).transpose() - qc) + qc).transpose();
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < training.size(); ++j) {
      // Align centroids before comparing, matching the translation invariance.
      Eigen::Matrix<double, Eigen::Dynamic, 3> tv = training[j]->vertices;
      Vec3 shift = qc - training[j]->centroid();
      tv.rowwise() += shift.transpose();
      double d = (rq - tv).norm();
      if (d < best_d) {
        best_d = d;
        best = int(j);
      }
    }
    CHECK(idx[size_t(r)] == best);
  }
}

TEST_CASE("key-frame selection is invariant to global translation") {
  SynthConfig cfg;
  cfg.frames = 6;
  cfg.views = 1;
  cfg.width = 16;
  cfg.height = 16;
  auto scene = generate_synthetic_scene(cfg);
  std::vector<const BodyMesh*> training;
  std::vector<BodyMesh> moved_storage;
  for (int t = 1; t < 6; ++t) training.push_back(&scene.frames[size_t(t)].mesh);
  auto base = select_key_frames(scene.frames[0].mesh, training);

  Vec3 d(3.5, -1.25, 0.75);
  BodyMesh moved_query = translated(scene.frames[0].mesh, d);
  for (int t = 1; t < 6; ++t) moved_storage.push_back(translated(scene.frames[size_t(t)].mesh, d));
  std::vector<const BodyMesh*> moved_training;
  for (const auto& m : moved_storage) moved_training.push_back(&m);
  CHECK(select_key_frames(moved_query, moved_training) == base);
}

TEST_CASE("obj round trip preserves the mesh") {
  namespace fs = std::filesystem;
  SynthConfig cfg;
  cfg.frames = 1;
  cfg.views = 1;
  cfg.width = 16;
  cfg.height = 16;
  auto scene = generate_synthetic_scene(cfg);
  auto path = (fs::temp_directory_path() / "radiant_mesh_test.obj").string();
  save_obj(path, scene.frames[0].mesh);
  auto loaded = load_obj(path);
  CHECK(loaded.vertex_count() == scene.frames[0].mesh.vertex_count());
  CHECK(loaded.faces == scene.frames[0].mesh.faces);
  CHECK((loaded.vertices - scene.frames[0].mesh.vertices).cwiseAbs().maxCoeff() < 1e-5);
  fs::remove(path);
}

TEST_CASE("mesh validation rejects out-of-range face indices") {
  BodyMesh m = single_triangle();
  m.faces(0, 2) = 9;
  CHECK_THROWS_AS(m.validate("test mesh"), std::invalid_argument);
}
