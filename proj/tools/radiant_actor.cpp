// Command-line front end: dataset generation, training, rendering,
// evaluation, and the ablation suite.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <Eigen/Geometry>

#include "CLI11.hpp"
#include "radiant/model.hpp"
#include "radiant/synth.hpp"
#include "radiant/train.hpp"

namespace {

using namespace radiant;

// Look-at camera on the ring, matching the dataset rig convention (image v
// grows downward, world up is +Y).
Camera orbit_camera(const Camera& base, const Vec3& target, double angle) {
  Vec3 pos0 = base.center();
  Vec3 rel = pos0 - target;
  double radius = std::hypot(rel.x(), rel.z());
  double base_ang = std::atan2(rel.x(), rel.z());
  Vec3 pos(target.x() + radius * std::sin(base_ang + angle), pos0.y(),
           target.z() + radius * std::cos(base_ang + angle));
  Camera cam = base;
  Vec3 z = (target - pos).normalized();
  Vec3 x = Vec3::UnitY().cross(z).normalized();
  Vec3 y = z.cross(x);
  Eigen::Matrix3d r_wc;
  r_wc.row(0) = x.transpose();
  r_wc.row(1) = -y.transpose();
  r_wc.row(2) = z.transpose();
  cam.rotation = r_wc;
  cam.translation = -r_wc * pos;
  return cam;
}

int cmd_gen_data(const std::string& config, const std::string& out) {
  SynthConfig cfg = synth_config_from_json_file(config);
  SceneDataset ds = generate_synthetic_scene(cfg, out);
  std::cout << "wrote " << ds.frames.size() << " frames x " << ds.cameras.size() << " views to "
            << out << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& dataset, const std::string& checkpoint,
              const std::string& log, bool no_fusion, bool no_appearance,
              const std::string& fusion_mode) {
  TrainConfig cfg = train_config_from_json_file(config);
  if (no_fusion) cfg.model.no_fusion = true;
  if (no_appearance) cfg.model.no_appearance = true;
  if (!fusion_mode.empty()) {
    if (cfg.model.no_fusion)
      throw std::invalid_argument("--fusion-mode is meaningless with --no-temporal-fusion");
    cfg.model.fusion_mode = fusion_mode_from_string(fusion_mode);
  }
  if (!checkpoint.empty()) cfg.checkpoint_path = checkpoint;
  if (!log.empty()) cfg.log_path = log;

  SceneDataset ds = load_dataset(dataset);
  Trainer<float> trainer(ds, cfg);
  trainer.run();
  std::cout << "trained " << trainer.iteration() << " iterations";
  if (!cfg.checkpoint_path.empty()) std::cout << "; checkpoint " << cfg.checkpoint_path;
  std::cout << "\n";
  return 0;
}

int cmd_render(const std::string& checkpoint, const std::string& dataset, int frame,
               const std::string& view, const std::string& out, int orbit_steps) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  Model<float> model = model_from_checkpoint<float>(ckpt);
  SceneDataset ds = load_dataset(dataset);
  if (frame < 0 || frame >= int(ds.frames.size()))
    throw std::invalid_argument("render: frame out of range");
  auto ctx = build_frame_context(model, ds, frame);

  if (view == "orbit") {
    Aabb bounds = ds.frames[size_t(frame)].mesh.bounds();
    Vec3 target = 0.5 * (bounds.lo + bounds.hi);
    std::filesystem::path p(out);
    std::string stem = (p.parent_path() / p.stem()).string();
    for (int i = 0; i < orbit_steps; ++i) {
      Camera cam = orbit_camera(ds.cameras.front(), target, 2 * M_PI * i / orbit_steps);
      ImageRGB img = render_image(model, *ctx, cam);
      char buf[16];
      std::snprintf(buf, sizeof(buf), "_%03d", i);
      write_png_rgb(stem + buf + p.extension().string(), img);
    }
    std::cout << "wrote " << orbit_steps << " orbit frames to " << stem << "_*.png\n";
    return 0;
  }

  int v = std::stoi(view);
  if (v < 0 || v >= int(ds.cameras.size()))
    throw std::invalid_argument("render: view out of range");
  ImageRGB img = render_image(model, *ctx, ds.cameras[size_t(v)]);
  write_png_rgb(out, img);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& dataset,
                 const std::string& out) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  Model<float> model = model_from_checkpoint<float>(ckpt);
  SceneDataset ds = load_dataset(dataset);
  std::vector<int> frames;
  for (size_t t = 0; t < ds.frames.size(); ++t) frames.push_back(int(t));
  std::vector<int> views;
  for (size_t v = 0; v < ds.cameras.size(); ++v) views.push_back(int(v));
  auto rows = evaluate_model(model, ds, frames, views);
  write_eval_csv(out, rows);
  std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
  return 0;
}

int cmd_ablate(const std::string& config, const std::string& dataset, const std::string& out) {
  TrainConfig cfg = train_config_from_json_file(config);
  SceneDataset ds = load_dataset(dataset);
  auto results = run_ablations<float>(ds, cfg, out);
  for (const auto& r : results)
    std::cout << r.variant << ": psnr " << r.mean_psnr << ", ssim " << r.mean_ssim << "\n";
  std::cout << "wrote " << out << "/ablation.csv and " << out << "/ablation.md\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pose- and appearance-conditioned neural renderer for articulated bodies"};
  app.require_subcommand(1);

  std::string config, dataset, checkpoint, log, out, view, fusion_mode;
  int frame = 0, orbit_steps = 12;
  bool no_fusion = false, no_appearance = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--config", config, "Scene config JSON")->required();
  gen->add_option("--out", out, "Output dataset directory")->required();

  auto* train = app.add_subcommand("train", "Train a model on a dataset");
  train->add_option("--config", config, "Training config JSON")->required();
  train->add_option("--dataset", dataset, "Dataset directory")->required();
  train->add_option("--checkpoint", checkpoint, "Checkpoint output path");
  train->add_option("--log", log, "Training log path (NDJSON)");
  train->add_flag("--no-temporal-fusion", no_fusion, "Disable key-frame fusion");
  train->add_flag("--no-appearance", no_appearance, "Disable the appearance code");
  train->add_option("--fusion-mode", fusion_mode, "paper-literal or standard")
      ->check(CLI::IsMember({"paper-literal", "standard"}));

  auto* render = app.add_subcommand("render", "Render a frame from a checkpoint");
  render->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  render->add_option("--dataset", dataset, "Dataset directory")->required();
  render->add_option("--frame", frame, "Frame index")->required();
  render->add_option("--view", view, "View index, or 'orbit'")->required();
  render->add_option("--out", out, "Output PNG path")->required();
  render->add_option("--orbit-steps", orbit_steps, "Views in an orbit sequence");

  auto* eval = app.add_subcommand("evaluate", "Score renders against ground truth");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  eval->add_option("--dataset", dataset, "Dataset directory")->required();
  eval->add_option("--out", out, "Output CSV path")->required();

  auto* ablate = app.add_subcommand("ablate", "Train and compare ablation variants");
  ablate->add_option("--config", config, "Training config JSON")->required();
  ablate->add_option("--dataset", dataset, "Dataset directory")->required();
  ablate->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(config, out);
    if (train->parsed())
      return cmd_train(config, dataset, checkpoint, log, no_fusion, no_appearance, fusion_mode);
    if (render->parsed()) return cmd_render(checkpoint, dataset, frame, view, out, orbit_steps);
    if (eval->parsed()) return cmd_evaluate(checkpoint, dataset, out);
    if (ablate->parsed()) return cmd_ablate(config, dataset, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
