/*
 * Copyright (C) 2026 The voxsplat authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "voxsplat/gradcheck.hpp"
#include "voxsplat/metrics.hpp"
#include "voxsplat/motion.hpp"
#include "voxsplat/ops.hpp"
#include "voxsplat/photometric.hpp"
#include "voxsplat/trainer.hpp"

namespace {

using namespace voxsplat;
namespace fs = std::filesystem;

KeyValueConfig load_config_or_empty(const std::string& path) {
  if (path.empty()) return KeyValueConfig{};
  if (!fs::exists(path)) throw std::invalid_argument("config file not found: " + path);
  return KeyValueConfig::parse_file(path);
}

Model model_from_file(const std::string& ckpt_path, const GridMeta& meta, TrainConfig* cfg_out,
                      AdamW* opt, int64_t* step) {
  if (!fs::exists(ckpt_path)) throw std::invalid_argument("checkpoint not found: " + ckpt_path);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const TrainConfig cfg = TrainConfig::from_config(KeyValueConfig::parse_string(ckpt.config_echo));
  std::mt19937_64 rng(cfg.seed);
  Model model = create_model(meta, cfg, rng);
  model_from_checkpoint(ckpt, model, opt, step);
  if (cfg_out) *cfg_out = cfg;
  return model;
}

ImageF frame_to_image(const std::vector<double>& color, const Intrinsics& k) {
  ImageF img = ImageF::zeros(k.width, k.height);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = std::clamp(color[i], 0.0, 1.0);
  return img;
}

MapF to_map(const std::vector<double>& v, const Intrinsics& k) {
  MapF m;
  m.width = k.width;
  m.height = k.height;
  m.data.resize(v.size());
  for (size_t i = 0; i < v.size(); ++i) m.data[i] = static_cast<float>(v[i]);
  return m;
}

int run_synth(const std::string& spec_path, const std::string& out, int64_t seed) {
  SceneSpec spec = spec_path.empty() ? SceneSpec{} : SceneSpec::from_config(load_config_or_empty(spec_path));
  if (spec_path.empty() && spec.objects.empty()) {
    SceneObject sphere;
    sphere.kind = SceneObject::Kind::Sphere;
    sphere.center = Eigen::Vector3d(0, 0.5, 0.8);
    sphere.half_extent = Eigen::Vector3d(0.7, 0.7, 0.7);
    sphere.albedo = Eigen::Vector3d(0.85, 0.25, 0.2);
    spec.objects.push_back(sphere);
    SceneObject box;
    box.kind = SceneObject::Kind::Box;
    box.center = Eigen::Vector3d(-1.2, -0.8, 0.5);
    box.half_extent = Eigen::Vector3d(0.6, 0.5, 0.5);
    box.albedo = Eigen::Vector3d(0.2, 0.4, 0.85);
    spec.objects.push_back(box);
  }
  if (seed >= 0) spec.seed = static_cast<uint64_t>(seed);
  spec.validate();
  save_scene(generate_scene(spec), out);
  std::cout << "wrote scene to " << out << "\n";
  return 0;
}

int run_fit(const std::string& data, const std::string& config_path, const std::string& out,
            int64_t seed, const std::string& resume_path) {
  TrainConfig cfg = TrainConfig::from_config(load_config_or_empty(config_path));
  if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
  const SceneSequence seq = load_scene(data);
  TrainResult resume;
  const TrainResult* resume_ptr = nullptr;
  if (!resume_path.empty()) {
    int64_t step = 0;
    resume.model = model_from_file(resume_path, seq.grid, nullptr, &resume.opt, &step);
    resume.opt.lr = cfg.lr;
    resume.opt.grid_lr = cfg.grid_lr;
    resume.steps_done = step;
    resume_ptr = &resume;
  }
  const TrainResult res = train(cfg, seq, out, resume_ptr);
  std::cout << "finished " << res.steps_done << " steps, final loss " << res.final_loss << "\n";
  return 0;
}

int run_render(const std::string& ckpt, const std::string& data, int frame,
               const std::string& out) {
  const SceneSequence seq = load_scene(data);
  if (frame < 0 || frame >= static_cast<int>(seq.frames.size())) {
    throw std::invalid_argument("frame index out of range");
  }
  TrainConfig cfg;
  Model model = model_from_file(ckpt, seq.grid, &cfg, nullptr, nullptr);
  fs::create_directories(out);
  const PrimitiveTensors prims = filter_gaussians(decode_primitives(model.grid, model.mlp));
  const SceneFrame& fr = seq.frames[static_cast<size_t>(frame)];
  for (size_t c = 0; c < fr.cameras.size(); ++c) {
    const RenderedFrame rf = render(prims, fr.cameras[c], cfg.render).to_frame(fr.cameras[c].intrinsics);
    const std::string stem = "cam" + std::to_string(c);
    write_png((fs::path(out) / (stem + "_color.png")).string(),
              frame_to_image(rf.color, fr.cameras[c].intrinsics));
    write_pfm((fs::path(out) / (stem + "_depth.pfm")).string(),
              to_map(rf.depth_norm, fr.cameras[c].intrinsics));
    write_pfm((fs::path(out) / (stem + "_alpha.pfm")).string(),
              to_map(rf.alpha, fr.cameras[c].intrinsics));
  }
  std::cout << "rendered " << fr.cameras.size() << " views to " << out << "\n";
  return 0;
}

int run_gradcheck(int64_t seed, bool corrupt, double threshold) {
  ad::g_corrupt_tanh_adjoint = corrupt;
  const std::vector<GradCheckEntry> entries = gradcheck_suite(static_cast<uint64_t>(seed), threshold);
  ad::g_corrupt_tanh_adjoint = false;
  bool all_pass = true;
  std::printf("%-18s %14s  %s\n", "op", "max_rel_err", "status");
  for (const GradCheckEntry& e : entries) {
    std::printf("%-18s %14.3e  %s\n", e.name.c_str(), e.max_rel_err, e.pass ? "pass" : "FAIL");
    all_pass = all_pass && e.pass;
  }
  if (!all_pass) {
    std::cerr << "gradcheck failed\n";
    return 2;
  }
  return 0;
}

int run_eval(const std::string& ckpt, const std::string& data, const std::string& out, int frame) {
  const SceneSequence seq = load_scene(data);
  if (frame < 0) frame = static_cast<int>(seq.frames.size()) / 2;
  if (frame >= static_cast<int>(seq.frames.size())) throw std::invalid_argument("frame out of range");
  TrainConfig cfg;
  Model model = model_from_file(ckpt, seq.grid, &cfg, nullptr, nullptr);
  fs::create_directories(out);
  const SceneFrame& fr = seq.frames[static_cast<size_t>(frame)];
  const PrimitiveTensors prims = filter_gaussians(decode_primitives(model.grid, model.mlp));

  std::ostringstream report;
  report.precision(10);
  double psnr_sum = 0, mae_sum = 0;
  report << "[psnr]\n";
  std::vector<double> maes;
  for (size_t c = 0; c < fr.cameras.size(); ++c) {
    const RenderedFrame rf = render(prims, fr.cameras[c], cfg.render).to_frame(fr.cameras[c].intrinsics);
    const double p = psnr(frame_to_image(rf.color, fr.cameras[c].intrinsics), fr.images[c]);
    psnr_sum += p;
    report << "psnr.cam" << c << " = " << p << "\n";
    maes.push_back(depth_mae(fr.depths[c], rf.depth_norm));
  }
  report << "psnr.mean = " << psnr_sum / static_cast<double>(fr.cameras.size()) << "\n";
  report << "[depth]\n";
  for (size_t c = 0; c < maes.size(); ++c) {
    report << "depth.mae.cam" << c << " = " << maes[c] << "\n";
    mae_sum += maes[c];
  }
  report << "depth.mae.mean = " << mae_sum / static_cast<double>(maes.size()) << "\n";
  report << "[velocity]\n";
  const ad::Tensor vel = predict_velocity(model.grid, model.head, /*training=*/false);
  report << velocity_report_text(velocity_report(vel.values(), fr.gt_velocity));

  std::ofstream f(fs::path(out) / "report.txt");
  f << report.str();
  std::cout << report.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxel-anchored gaussian splatting pre-training pipeline"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, data_dir, config_path, ckpt_path, resume_path;
  int64_t seed = -1;
  int frame = -1;
  bool corrupt = false;
  double threshold = 1e-4;

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
  synth->add_option("--spec", spec_path, "scene spec config");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--seed", seed, "seed override");

  auto* fit = app.add_subcommand("fit", "run the pre-training loop");
  fit->add_option("--data", data_dir, "scene directory")->required();
  fit->add_option("--config", config_path, "training config");
  fit->add_option("--out", out_dir, "output directory")->required();
  fit->add_option("--seed", seed, "seed override");
  fit->add_option("--resume", resume_path, "checkpoint to resume from");

  auto* rnd = app.add_subcommand("render", "render from a checkpoint");
  rnd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  rnd->add_option("--data", data_dir, "scene directory")->required();
  rnd->add_option("--frame", frame, "frame index")->required();
  rnd->add_option("--out", out_dir, "output directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gc->add_option("--seed", seed, "rng seed");
  gc->add_flag("--corrupt-adjoint", corrupt, "negative control: corrupt the tanh adjoint");
  gc->add_option("--threshold", threshold, "max relative error allowed");

  auto* ev = app.add_subcommand("eval", "PSNR / depth MAE / velocity report");
  ev->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  ev->add_option("--data", data_dir, "scene directory")->required();
  ev->add_option("--out", out_dir, "output directory")->required();
  ev->add_option("--frame", frame, "frame index (default: middle)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return run_synth(spec_path, out_dir, seed);
    if (fit->parsed()) return run_fit(data_dir, config_path, out_dir, seed, resume_path);
    if (rnd->parsed()) return run_render(ckpt_path, data_dir, frame, out_dir);
    if (gc->parsed()) return run_gradcheck(seed < 0 ? 0 : seed, corrupt, threshold);
    if (ev->parsed()) return run_eval(ckpt_path, data_dir, out_dir, frame);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
