#pragma once

// Pinhole camera math: ray generation, projection, depth lifting.
// Convention: right-handed, Y up, camera looks down +Z in camera space;
// world-to-camera is x_cam = R * x_world + t. Depth maps store camera-space z.

#include "radiant/mesh.hpp"

namespace radiant {

struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world-to-camera
  Vec3 translation = Vec3::Zero();
  int width = 0, height = 0;

  void validate(const std::string& what) const;

  Vec3 center() const { return -rotation.transpose() * translation; }
  Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }
  Vec3 to_world(const Vec3& p_cam) const { return rotation.transpose() * (p_cam - translation); }

  // Projects a world point; returns (u, v, depth). depth <= 0 means behind.
  Vec3 project(const Vec3& p) const {
    Vec3 c = to_camera(p);
    return {fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy, c.z()};
  }

  // World point for pixel (u, v) at camera-space depth z.
  Vec3 lift(double u, double v, double depth) const {
    Vec3 c((u - cx) / fx * depth, (v - cy) / fy * depth, depth);
    return to_world(c);
  }

  // Unit world-space direction through pixel center (u, v).
  Vec3 pixel_direction(double u, double v) const {
    Vec3 d_cam((u - cx) / fx, (v - cy) / fy, 1.0);
    return (rotation.transpose() * d_cam).normalized();
  }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit norm
  double near = 0, far = 0;
};

// Rays through pixel centers; near/far from the frame's body bounds expanded
// by a margin. Out-of-bounds pixels are an error.
std::vector<Ray> generate_rays(const Camera& camera, const std::vector<std::pair<double, double>>& pixels,
                               const Aabb& body_bounds, double margin = 0.1);

// Intersects a ray with an AABB; returns false when it misses.
bool intersect_aabb(const Vec3& origin, const Vec3& dir, const Aabb& box, double& t0, double& t1);

}  // namespace radiant
