#include "radiant/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace radiant {

namespace fs = std::filesystem;
using nlohmann::json;

void SceneDataset::validate() const {
  if (cameras.empty()) throw std::runtime_error("dataset: no cameras");
  if (input_view < 0 || size_t(input_view) >= cameras.size())
    throw std::runtime_error("dataset: input_view out of range");
  for (size_t v = 0; v < cameras.size(); ++v) cameras[v].validate("view " + std::to_string(v));
  for (int t : train_frames)
    for (int u : test_frames)
      if (t == u) throw std::runtime_error("dataset: frame " + std::to_string(t) +
                                           " appears in both train and test splits");
  Eigen::Index nv = -1;
  for (const auto& f : frames) {
    if (f.views.size() != cameras.size())
      throw std::runtime_error("dataset: frame " + std::to_string(f.index) + " has " +
                               std::to_string(f.views.size()) + " views, expected " +
                               std::to_string(cameras.size()));
    if (nv < 0) nv = f.mesh.vertex_count();
    if (f.mesh.vertex_count() != nv)
      throw std::runtime_error("dataset: frame " + std::to_string(f.index) +
                               " mesh vertex count differs (topology must be fixed)");
    for (size_t v = 0; v < f.views.size(); ++v) {
      const auto& fv = f.views[v];
      const auto& cam = cameras[v];
      if (fv.rgb.width != cam.width || fv.rgb.height != cam.height ||
          fv.depth.width != cam.width || fv.depth.height != cam.height ||
          fv.mask.width != cam.width || fv.mask.height != cam.height)
        throw std::runtime_error("dataset: frame " + std::to_string(f.index) + " view " +
                                 std::to_string(v) + " image dimensions mismatch camera");
      for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
          bool fg = fv.mask.at(y, x) > 0.5f;
          bool has_depth = fv.depth.at(y, x) > 0.f;
          if (fg != has_depth)
            throw std::runtime_error("dataset: frame " + std::to_string(f.index) + " view " +
                                     std::to_string(v) + " depth/mask disagree at pixel (" +
                                     std::to_string(x) + "," + std::to_string(y) + ")");
        }
    }
  }
}

namespace {

json camera_to_json(const Camera& c) {
  json j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) rot[size_t(r * 3 + k)] = c.rotation(r, k);
  j["rotation"] = rot;
  j["translation"] = {c.translation.x(), c.translation.y(), c.translation.z()};
  return j;
}

Camera camera_from_json(const json& j) {
  Camera c;
  c.fx = j.at("fx");
  c.fy = j.at("fy");
  c.cx = j.at("cx");
  c.cy = j.at("cy");
  c.width = j.at("width");
  c.height = j.at("height");
  auto rot = j.at("rotation").get<std::vector<double>>();
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) c.rotation(r, k) = rot[size_t(r * 3 + k)];
  auto t = j.at("translation").get<std::vector<double>>();
  c.translation = Vec3(t[0], t[1], t[2]);
  return c;
}

}  // namespace

void save_dataset(const std::string& dir, const SceneDataset& ds) {
  fs::create_directories(dir);
  json cams;
  cams["input_view"] = ds.input_view;
  cams["train_views"] = ds.train_views;
  cams["train_frames"] = ds.train_frames;
  cams["test_frames"] = ds.test_frames;
  for (const auto& c : ds.cameras) cams["views"].push_back(camera_to_json(c));
  std::ofstream(dir + "/cameras.json") << cams.dump(2) << "\n";
  for (const auto& f : ds.frames) {
    std::string fdir = dir + "/frames/" + std::to_string(f.index);
    fs::create_directories(fdir);
    for (size_t v = 0; v < f.views.size(); ++v) {
      std::string base = fdir + "/view_" + std::to_string(v);
      write_png_rgb(base + ".png", f.views[v].rgb);
      write_depth(base + ".depth", f.views[v].depth);
      write_png_mask(base + ".mask.png", f.views[v].mask);
    }
    save_obj(fdir + "/mesh.obj", f.mesh);
    json pose(f.pose);
    std::ofstream(fdir + "/pose.json") << pose.dump(2) << "\n";
  }
}

SceneDataset load_dataset(const std::string& dir) {
  std::ifstream cam_file(dir + "/cameras.json");
  if (!cam_file) throw std::runtime_error("dataset: missing " + dir + "/cameras.json");
  json cams = json::parse(cam_file);
  SceneDataset ds;
  ds.input_view = cams.at("input_view");
  ds.train_views = cams.at("train_views").get<std::vector<int>>();
  ds.train_frames = cams.at("train_frames").get<std::vector<int>>();
  ds.test_frames = cams.at("test_frames").get<std::vector<int>>();
  for (const auto& j : cams.at("views")) ds.cameras.push_back(camera_from_json(j));

  std::vector<int> indices;
  for (const auto& e : fs::directory_iterator(dir + "/frames"))
    indices.push_back(std::stoi(e.path().filename().string()));
  std::sort(indices.begin(), indices.end());
  for (int t : indices) {
    std::string fdir = dir + "/frames/" + std::to_string(t);
    Frame f;
    f.index = t;
    for (size_t v = 0; v < ds.cameras.size(); ++v) {
      std::string base = fdir + "/view_" + std::to_string(v);
      if (!fs::exists(base + ".png") || !fs::exists(base + ".depth") ||
          !fs::exists(base + ".mask.png"))
        throw std::runtime_error("dataset: missing files for frame " + std::to_string(t) +
                                 " view " + std::to_string(v));
      FrameView fv;
      fv.rgb = read_png_rgb(base + ".png");
      fv.depth = read_depth(base + ".depth");
      fv.mask = read_png_mask(base + ".mask.png");
      // Background stays black after masking.
      for (int y = 0; y < fv.rgb.height; ++y)
        for (int x = 0; x < fv.rgb.width; ++x)
          if (fv.mask.at(y, x) < 0.5f)
            for (int c = 0; c < 3; ++c) fv.rgb.at(y, x, c) = 0.f;
      f.views.push_back(std::move(fv));
    }
    f.mesh = load_obj(fdir + "/mesh.obj");
    f.mesh.frame_index = t;
    if (fs::exists(fdir + "/pose.json")) {
      json pose = json::parse(std::ifstream(fdir + "/pose.json"));
      for (auto& [k, v] : pose.items()) f.pose[k] = v;
    }
    ds.frames.push_back(std::move(f));
  }
  ds.validate();
  return ds;
}

PointCloud lift_depth_to_points(const Frame& frame, int view_index, const Camera& camera,
                                const PointHashGrid* surface) {
  const auto& fv = frame.views[size_t(view_index)];
  Vec3 centroid = frame.mesh.centroid();
  PointCloud cloud;
  for (int y = 0; y < fv.depth.height; ++y)
    for (int x = 0; x < fv.depth.width; ++x) {
      if (fv.mask.at(y, x) < 0.5f) continue;
      float d = fv.depth.at(y, x);
      if (d <= 0.f) continue;
      double u = x + 0.5, v = y + 0.5;
      Vec3 p = camera.lift(u, v, double(d));
      if (surface) {
        // "Dilated posed mesh" filter: 5% scale about the centroid, i.e. the
        // surface moves outward by 5% of the centroid distance (8 cm floor).
        double allow = std::max(0.05 * (p - centroid).norm(), 0.08);
        if (!surface->within(p, allow)) continue;
      }
      cloud.points.push_back(p);
      cloud.colors.push_back({fv.rgb.at(y, x, 0), fv.rgb.at(y, x, 1), fv.rgb.at(y, x, 2)});
      cloud.pixels.push_back({u, v});
    }
  return cloud;
}

}  // namespace radiant
