#include "radiant/camera.hpp"

#include <stdexcept>

namespace radiant {

void Camera::validate(const std::string& what) const {
  if (fx <= 0 || fy <= 0) throw std::runtime_error(what + ": focal lengths must be positive");
  if (cx < 0 || cx > width || cy < 0 || cy > height)
    throw std::runtime_error(what + ": principal point outside image");
  Eigen::Matrix3d should_be_identity = rotation * rotation.transpose();
  if ((should_be_identity - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-5)
    throw std::runtime_error(what + ": rotation is not orthonormal");
}

std::vector<Ray> generate_rays(const Camera& camera,
                               const std::vector<std::pair<double, double>>& pixels,
                               const Aabb& body_bounds, double margin) {
  Aabb box = body_bounds.expanded(margin);
  Vec3 origin = camera.center();
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (auto [u, v] : pixels) {
    if (u < 0 || u >= camera.width || v < 0 || v >= camera.height)
      throw std::invalid_argument("generate_rays: pixel (" + std::to_string(u) + "," +
                               std::to_string(v) + ") outside image bounds");
    Ray r;
    r.origin = origin;
    r.direction = camera.pixel_direction(u, v);
    double t0, t1;
    if (intersect_aabb(r.origin, r.direction, box, t0, t1) && t1 > 0) {
      r.near = std::max(t0, 1e-3);
      r.far = t1;
    } else {
      // Ray misses the body region; keep a thin degenerate-but-valid interval
      // at the box's distance so downstream code renders pure background.
      double d = (box.lo + (box.hi - box.lo) * 0.5 - r.origin).norm();
      r.near = std::max(d - margin, 1e-3);
      r.far = r.near + 2 * margin;
    }
    rays.push_back(r);
  }
  return rays;
}

bool intersect_aabb(const Vec3& origin, const Vec3& dir, const Aabb& box, double& t0, double& t1) {
  t0 = -std::numeric_limits<double>::infinity();
  t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(dir[k]) < 1e-12) {
      if (origin[k] < box.lo[k] || origin[k] > box.hi[k]) return false;
      continue;
    }
    double a = (box.lo[k] - origin[k]) / dir[k];
    double b = (box.hi[k] - origin[k]) / dir[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  return t0 <= t1;
}

}  // namespace radiant
