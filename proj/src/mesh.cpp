#include "radiant/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace radiant {

void BodyMesh::validate(const std::string& what) const {
  for (Eigen::Index f = 0; f < faces.rows(); ++f)
    for (int k = 0; k < 3; ++k)
      if (faces(f, k) < 0 || faces(f, k) >= vertices.rows())
        throw std::invalid_argument(what + ": face " + std::to_string(f) +
                                 " references out-of-range vertex " + std::to_string(faces(f, k)));
}

void save_obj(const std::string& path, const BodyMesh& mesh) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  char buf[128];
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "v %.6f %.6f %.6f\n", mesh.vertices(i, 0), mesh.vertices(i, 1),
                  mesh.vertices(i, 2));
    os << buf;
  }
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f)
    os << "f " << mesh.faces(f, 0) + 1 << " " << mesh.faces(f, 1) + 1 << " " << mesh.faces(f, 2) + 1
       << "\n";
}

BodyMesh load_obj(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open mesh file " + path);
  std::vector<Vec3> verts;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x() >> v.y() >> v.z();
      verts.push_back(v);
    } else if (tag == "f") {
      Eigen::Vector3i f;
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        ss >> tok;
        f[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      faces.push_back(f);
    }
  }
  BodyMesh mesh;
  mesh.vertices.resize(Eigen::Index(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(Eigen::Index(i)) = verts[i];
  mesh.faces.resize(Eigen::Index(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) mesh.faces.row(Eigen::Index(i)) = faces[i];
  mesh.validate(path);
  return mesh;
}

Vec3 anchor_point(const SurfaceAnchor& a, const BodyMesh& mesh) {
  const auto f = mesh.faces.row(a.face);
  return a.bary[0] * mesh.vertices.row(f[0]).transpose() +
         a.bary[1] * mesh.vertices.row(f[1]).transpose() +
         a.bary[2] * mesh.vertices.row(f[2]).transpose();
}

SurfaceSampleSet sample_surface_points(const BodyMesh& mesh, int samples_per_face, uint64_t seed) {
  if (samples_per_face < 1) throw std::invalid_argument("sample_surface_points: N_a must be >= 1");
  SurfaceSampleSet out;
  out.points.reserve(size_t(mesh.face_count()) * size_t(samples_per_face));
  out.anchors.reserve(out.points.capacity());
  std::mt19937 rng{uint32_t(seed)};
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
    const auto idx = mesh.faces.row(f);
    Vec3 a = mesh.vertices.row(idx[0]), b = mesh.vertices.row(idx[1]), c = mesh.vertices.row(idx[2]);
    double area2 = (b - a).cross(c - a).norm();
    bool degenerate = area2 < 1e-14;
    if (degenerate) ++out.degenerate_faces;
    for (int s = 0; s < samples_per_face; ++s) {
      SurfaceAnchor anchor;
      anchor.face = int(f);
      if (degenerate) {
        anchor.bary = Vec3::Constant(1.0 / 3.0);  // centroid fallback
      } else {
        double r1 = std::sqrt(uni(rng)), r2 = uni(rng);
        anchor.bary = Vec3(1.0 - r1, r1 * (1.0 - r2), r1 * r2);
      }
      out.anchors.push_back(anchor);
      out.points.push_back(anchor.bary[0] * a + anchor.bary[1] * b + anchor.bary[2] * c);
    }
  }
  if (out.degenerate_faces)
    std::cerr << "warning: " << out.degenerate_faces
              << " degenerate faces sampled at their centroid\n";
  return out;
}

PointHashGrid::PointHashGrid(const SurfaceSampleSet& samples, double cell_size)
    : samples_(&samples), cell_(cell_size) {
  for (size_t i = 0; i < samples.points.size(); ++i) {
    auto c = cell_of(samples.points[i]);
    cells_[c].push_back(int(i));
    for (int k = 0; k < 3; ++k) {
      cmin_[size_t(k)] = std::min(cmin_[size_t(k)], c[size_t(k)]);
      cmax_[size_t(k)] = std::max(cmax_[size_t(k)], c[size_t(k)]);
    }
  }
}

std::array<int32_t, 3> PointHashGrid::cell_of(const Vec3& p) const {
  return {int32_t(std::floor(p.x() / cell_)), int32_t(std::floor(p.y() / cell_)),
          int32_t(std::floor(p.z() / cell_))};
}

PointHashGrid::Result PointHashGrid::nearest(const Vec3& x) const {
  Result best;
  if (!samples_ || samples_->points.empty())
    throw std::runtime_error("nearest_surface_point: empty sample set");
  auto c0 = cell_of(x);
  // Any point in a cell at Chebyshev ring r+1 lies at distance >= r*cell, so
  // after ring r the search can stop once best.distance <= r*cell. The grid
  // extent bounds the number of rings that can hold data.
  int max_ring = 0;
  for (size_t k = 0; k < 3; ++k)
    max_ring = std::max({max_ring, c0[k] - cmin_[k], cmax_[k] - c0[k]});
  for (int ring = 0; ring <= max_ring; ++ring) {
    for (int dx = -ring; dx <= ring; ++dx)
      for (int dy = -ring; dy <= ring; ++dy)
        for (int dz = -ring; dz <= ring; ++dz) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
          auto it = cells_.find({c0[0] + dx, c0[1] + dy, c0[2] + dz});
          if (it == cells_.end()) continue;
          for (int i : it->second) {
            double d = (samples_->points[size_t(i)] - x).norm();
            if (d < best.distance) {
              best.distance = d;
              best.point = samples_->points[size_t(i)];
              best.anchor = samples_->anchors[size_t(i)];
              best.sample_index = i;
            }
          }
        }
    if (best.sample_index >= 0 && best.distance <= double(ring) * cell_) break;
  }
  return best;
}

bool PointHashGrid::within(const Vec3& x, double gamma) const {
  auto c0 = cell_of(x);
  // Cells outside the populated extent are empty, so clamp the reach there;
  // this also keeps huge gammas from overflowing the loop bounds.
  double reach_d = std::ceil(gamma / cell_);
  int lo[3], hi[3];
  for (size_t k = 0; k < 3; ++k) {
    lo[k] = int(std::max(double(cmin_[k] - c0[k]), -reach_d));
    hi[k] = int(std::min(double(cmax_[k] - c0[k]), reach_d));
  }
  double g2 = gamma * gamma;
  for (int dx = lo[0]; dx <= hi[0]; ++dx)
    for (int dy = lo[1]; dy <= hi[1]; ++dy)
      for (int dz = lo[2]; dz <= hi[2]; ++dz) {
        auto it = cells_.find({c0[0] + dx, c0[1] + dy, c0[2] + dz});
        if (it == cells_.end()) continue;
        for (int i : it->second)
          if ((samples_->points[size_t(i)] - x).squaredNorm() < g2) return true;
      }
  return false;
}

PointHashGrid::Result nearest_surface_point_bruteforce(const Vec3& x,
                                                       const SurfaceSampleSet& samples) {
  if (samples.points.empty()) throw std::runtime_error("nearest_surface_point: empty sample set");
  PointHashGrid::Result best;
  for (size_t i = 0; i < samples.points.size(); ++i) {
    double d = (samples.points[i] - x).norm();
    if (d < best.distance) {
      best.distance = d;
      best.point = samples.points[i];
      best.anchor = samples.anchors[i];
      best.sample_index = int(i);
    }
  }
  return best;
}

std::vector<uint8_t> filter_samples(const std::vector<Vec3>& points, const PointHashGrid& grid,
                                    double gamma) {
  if (gamma <= 0) throw std::invalid_argument("filter_samples: gamma must be positive");
  std::vector<uint8_t> keep(points.size());
  for (size_t i = 0; i < points.size(); ++i) keep[i] = grid.within(points[i], gamma) ? 1 : 0;
  return keep;
}

Vec3 track_point(const SurfaceAnchor& anchor, const BodyMesh& source, const BodyMesh& target) {
  if (source.vertex_count() != target.vertex_count() || source.face_count() != target.face_count())
    throw std::invalid_argument("track_point: mesh topology mismatch (" +
                             std::to_string(source.vertex_count()) + " vs " +
                             std::to_string(target.vertex_count()) + " vertices)");
  return anchor_point(anchor, target);
}

Eigen::MatrixXd key_frame_distances(const BodyMesh& query,
                                    const std::vector<const BodyMesh*>& training_meshes) {
  if (training_meshes.empty())
    throw std::invalid_argument("select_key_frames: need at least one training frame");
  Vec3 c = query.centroid();
  Eigen::MatrixXd dist(3, Eigen::Index(training_meshes.size()));
  for (int r = 0; r < 3; ++r) {
    double angle = (r + 1) * M_PI / 2.0;  // 90, 180, 270 degrees about vertical axis
    Eigen::Matrix3d rot = Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
    Eigen::Matrix<double, Eigen::Dynamic, 3> rotated =
        (query.vertices.rowwise() - c.transpose()) * rot.transpose();
    rotated.rowwise() += c.transpose();
    for (size_t j = 0; j < training_meshes.size(); ++j)
      dist(r, Eigen::Index(j)) = (rotated - training_meshes[j]->vertices).norm();
  }
  return dist;
}

std::vector<int> select_key_frames(const BodyMesh& query,
                                   const std::vector<const BodyMesh*>& training_meshes) {
  Eigen::MatrixXd dist = key_frame_distances(query, training_meshes);
  std::vector<int> keys(3);
  for (int r = 0; r < 3; ++r) {
    Eigen::Index best;
    dist.row(r).minCoeff(&best);
    keys[size_t(r)] = int(best);
  }
  return keys;
}

}  // namespace radiant
