#pragma once

// Multi-view human-motion sequences on disk:
//   cameras.json                      intrinsics/extrinsics per view + splits
//   frames/<t>/view_<v>.png           8-bit RGB (background black)
//   frames/<t>/view_<v>.depth        "DPTH" u32 H, u32 W, H*W LE f32 meters
//   frames/<t>/view_<v>.mask.png      0/255 foreground mask
//   frames/<t>/mesh.obj               posed body mesh, fixed topology
//   frames/<t>/pose.json              joint angles

#include "radiant/camera.hpp"
#include "radiant/image.hpp"

#include <map>

namespace radiant {

struct FrameView {
  ImageRGB rgb;
  ImageGray depth;
  ImageGray mask;
};

struct Frame {
  int index = -1;
  std::vector<FrameView> views;  // one per camera
  BodyMesh mesh;
  std::map<std::string, double> pose;  // joint angles, radians
};

struct SceneDataset {
  std::vector<Camera> cameras;
  std::vector<Frame> frames;
  int input_view = 0;
  std::vector<int> train_views;
  std::vector<int> train_frames;
  std::vector<int> test_frames;

  const Camera& input_camera() const { return cameras[size_t(input_view)]; }
  void validate() const;
};

void save_dataset(const std::string& dir, const SceneDataset& ds);
SceneDataset load_dataset(const std::string& dir);

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Eigen::Vector3f> colors;
  std::vector<std::pair<double, double>> pixels;  // source (u, v)
};

// One world-space point per masked pixel with positive depth; points outside
// the dilated posed mesh (5% scale about the centroid, with a small absolute
// floor) are dropped.
PointCloud lift_depth_to_points(const Frame& frame, int view_index, const Camera& camera,
                                const PointHashGrid* surface = nullptr);

}  // namespace radiant
