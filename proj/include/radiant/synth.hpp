#pragma once

// Procedural synthetic scenes: an articulated capsule-limb body animated by a
// skeleton, rendered with exact depth and masks from a ring of cameras.

#include "radiant/dataset.hpp"

namespace radiant {

struct SynthConfig {
  int frames = 4;
  int views = 6;
  int width = 64;
  int height = 64;
  uint64_t seed = 1;
  int test_frames = 0;        // trailing frames held out as novel poses
  int segments = 10;          // capsule cross-section resolution
  int side_rings = 4;         // rings along the capsule side
  int cap_rings = 3;          // rings per hemispherical cap
  double camera_radius = 2.6;
  double camera_height = 0.9;
  double yaw_turns = 1.0;     // full-body yaw sweep over the sequence, in turns
  double appearance_jitter = 0.0;  // per-frame RGB tint amplitude in [0,1]

  void validate() const;
};

SynthConfig synth_config_from_json_file(const std::string& path);

// Deterministic per seed; writes the dataset directory and returns the scene.
SceneDataset generate_synthetic_scene(const SynthConfig& cfg, const std::string& out_dir);

// In-memory variant used by tests.
SceneDataset generate_synthetic_scene(const SynthConfig& cfg);

}  // namespace radiant
