#pragma once

// Posed body meshes and everything anchored to them: surface sampling,
// nearest-surface queries, cross-frame point tracking, key-frame selection.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace radiant {

using Vec3 = Eigen::Vector3d;

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Aabb expanded(double margin) const { return {lo.array() - margin, hi.array() + margin}; }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

struct BodyMesh {
  Eigen::Matrix<double, Eigen::Dynamic, 3> vertices;  // world units
  Eigen::Matrix<int, Eigen::Dynamic, 3> faces;
  int frame_index = -1;

  Eigen::Index vertex_count() const { return vertices.rows(); }
  Eigen::Index face_count() const { return faces.rows(); }
  Vec3 centroid() const { return vertices.colwise().mean().transpose(); }
  Aabb bounds() const {
    Aabb b;
    for (Eigen::Index i = 0; i < vertices.rows(); ++i) b.extend(vertices.row(i).transpose());
    return b;
  }
  void validate(const std::string& what) const;
};

void save_obj(const std::string& path, const BodyMesh& mesh);
BodyMesh load_obj(const std::string& path);

// Barycentric anchor on a fixed-topology mesh; evaluating the same anchor on
// another frame's vertices tracks the point through the body motion.
struct SurfaceAnchor {
  int face = -1;
  Vec3 bary = Vec3::Zero();
};

Vec3 anchor_point(const SurfaceAnchor& a, const BodyMesh& mesh);

struct SurfaceSampleSet {
  std::vector<Vec3> points;
  std::vector<SurfaceAnchor> anchors;
  int degenerate_faces = 0;

  size_t size() const { return points.size(); }
};

// N_a uniform barycentric samples per face, deterministic per seed.
SurfaceSampleSet sample_surface_points(const BodyMesh& mesh, int samples_per_face, uint64_t seed);

// Uniform spatial hash over the sample points for sub-linear nearest queries.
class PointHashGrid {
 public:
  PointHashGrid() = default;
  PointHashGrid(const SurfaceSampleSet& samples, double cell_size);

  struct Result {
    Vec3 point;
    double distance = std::numeric_limits<double>::infinity();
    SurfaceAnchor anchor;
    int sample_index = -1;
  };

  // Exact nearest sample (ring search, matches the brute-force scan).
  Result nearest(const Vec3& x) const;
  // Early-exit predicate used by the keep-mask: min distance < gamma.
  bool within(const Vec3& x, double gamma) const;

  const SurfaceSampleSet* samples() const { return samples_; }

 private:
  struct CellHash {
    size_t operator()(const std::array<int32_t, 3>& c) const {
      return size_t(uint64_t(uint32_t(c[0])) * 73856093ull ^ uint64_t(uint32_t(c[1])) * 19349669ull ^
                    uint64_t(uint32_t(c[2])) * 83492791ull);
    }
  };
  std::array<int32_t, 3> cell_of(const Vec3& p) const;

  const SurfaceSampleSet* samples_ = nullptr;
  double cell_ = 1.0;
  std::array<int32_t, 3> cmin_{INT32_MAX, INT32_MAX, INT32_MAX};
  std::array<int32_t, 3> cmax_{INT32_MIN, INT32_MIN, INT32_MIN};
  std::unordered_map<std::array<int32_t, 3>, std::vector<int>, CellHash> cells_;
};

// Brute-force nearest over all samples; oracle path for the hash grid.
PointHashGrid::Result nearest_surface_point_bruteforce(const Vec3& x,
                                                       const SurfaceSampleSet& samples);

// Keep-mask: true where min distance to the surface sample set is below gamma.
std::vector<uint8_t> filter_samples(const std::vector<Vec3>& points, const PointHashGrid& grid,
                                    double gamma);

// Barycentric re-evaluation on the target frame's vertices.
Vec3 track_point(const SurfaceAnchor& anchor, const BodyMesh& source, const BodyMesh& target);

// For each Y-axis rotation of the query pose (90/180/270 degrees about the
// vertical axis through the query centroid), the training frame minimizing
// vertex L2 distance. Returns exactly 3 indices; duplicates allowed.
std::vector<int> select_key_frames(const BodyMesh& query,
                                   const std::vector<const BodyMesh*>& training_meshes);

// Distance table used by select_key_frames, exposed for the oracle tests:
// rotated-query (3 rows) x training-frame (columns) Frobenius distances.
Eigen::MatrixXd key_frame_distances(const BodyMesh& query,
                                    const std::vector<const BodyMesh*>& training_meshes);

}  // namespace radiant
