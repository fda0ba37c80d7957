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

// Acceptance suite: one pass/fail line per criterion. `acceptance N` runs a
// single criterion; no argument runs all ten. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "voxsplat/checkpoint.hpp"
#include "voxsplat/decoder.hpp"
#include "voxsplat/gradcheck.hpp"
#include "voxsplat/image_io.hpp"
#include "voxsplat/metrics.hpp"
#include "voxsplat/motion.hpp"
#include "voxsplat/ops.hpp"
#include "voxsplat/photometric.hpp"
#include "voxsplat/rasterizer.hpp"
#include "voxsplat/scene.hpp"
#include "voxsplat/trainer.hpp"

namespace {

using namespace voxsplat;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path work_dir() {
  fs::path p = fs::temp_directory_path() / "voxsplat_acceptance";
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient correctness over >= 5 seeds in < 2 minutes.
// ---------------------------------------------------------------------------
bool criterion_1(std::string& detail) {
  const Clock::time_point t0 = Clock::now();
  double worst = 0;
  std::string worst_name;
  int entries = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    for (const GradCheckEntry& e : gradcheck_suite(seed, 1e-4)) {
      ++entries;
      if (e.max_rel_err > worst) {
        worst = e.max_rel_err;
        worst_name = e.name;
      }
      if (!e.pass) {
        detail = "seed " + std::to_string(seed) + " entry " + e.name + " rel err " +
                 std::to_string(e.max_rel_err);
        return false;
      }
    }
  }
  const double wall = seconds_since(t0);
  std::ostringstream os;
  os << entries << " entries over 5 seeds, worst " << worst_name << " " << worst << ", "
     << wall << " s";
  detail = os.str();
  return wall < 120.0;
}

// ---------------------------------------------------------------------------
// Criterion 2: tile renderer vs brute-force oracle on 10 random scenes.
// ---------------------------------------------------------------------------
std::vector<GaussianPrimitive> random_scene(std::mt19937_64& rng, int count, int sh_degree) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> pos_xy(-1.6, 1.6), pos_z(2.0, 8.0);
  std::uniform_real_distribution<double> scl(0.05, 0.45);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<GaussianPrimitive> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    GaussianPrimitive g;
    g.position = {pos_xy(rng), pos_xy(rng), pos_z(rng)};
    Eigen::Vector4d q(nd(rng), nd(rng), nd(rng), nd(rng));
    q.normalize();
    g.rotation = {q[0], q[1], q[2], q[3]};
    g.scale = {scl(rng), scl(rng), scl(rng)};
    g.opacity = 0.05 + 0.9 * u01(rng);
    // The brute-force oracle evaluates whatever coefficients the primitive
    // carries, so the count must match the spherical-harmonic degree in use.
    g.color.assign(static_cast<size_t>(3 * (sh_degree + 1) * (sh_degree + 1)), 0.0);
    for (int c = 0; c < 3; ++c) g.color[static_cast<size_t>(c)] = u01(rng);
    for (size_t c = 3; c < g.color.size(); ++c) g.color[c] = 0.3 * (u01(rng) - 0.5);
    out.push_back(g);
  }
  return out;
}

Camera oracle_camera(int w, int h) {
  Camera cam;
  cam.intrinsics.width = w;
  cam.intrinsics.height = h;
  cam.intrinsics.fx = cam.intrinsics.fy = 0.8 * w;
  cam.intrinsics.cx = 0.5 * w;
  cam.intrinsics.cy = 0.5 * h;
  cam.pose.rotation = Eigen::Matrix3d::Identity();
  cam.pose.translation = Eigen::Vector3d::Zero();
  return cam;
}

bool criterion_2(std::string& detail) {
  const Clock::time_point t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> nprims(120, 200);
  const Camera cam = oracle_camera(64, 64);
  double worst = 0;
  for (int s = 0; s < 10; ++s) {
    RenderOptions opts = RenderOptions::exact();
    opts.sh_degree = s % 2;
    const std::vector<GaussianPrimitive> prims = random_scene(rng, nprims(rng), opts.sh_degree);
    const RenderedFrame oracle = render_bruteforce(prims, cam, opts);
    const RenderOutputs tiled = render(to_tensors(prims, opts.sh_degree), cam, opts);
    for (int64_t i = 0; i < 64 * 64; ++i) {
      for (int c = 0; c < 3; ++c) {
        worst = std::max(worst,
                         std::fabs(tiled.color.data()[i * 3 + c] - oracle.color[i * 3 + c]));
      }
      worst = std::max(worst, std::fabs(tiled.depth_raw.data()[i] - oracle.depth_raw[i]));
      worst = std::max(worst, std::fabs(tiled.depth_norm.data()[i] - oracle.depth_norm[i]));
      worst = std::max(worst, std::fabs(tiled.alpha.data()[i] - oracle.alpha[i]));
    }
  }
  const double wall = seconds_since(t0);
  std::ostringstream os;
  os << "10 scenes, max |tile - oracle| " << worst << " over color/depth/alpha, " << wall
     << " s";
  detail = os.str();
  return worst < 1e-6 && wall < 60.0;
}

// ---------------------------------------------------------------------------
// Criterion 3: filtering vs clamping equivalence under the renderer.
// ---------------------------------------------------------------------------
bool criterion_3(std::string& detail) {
  std::mt19937_64 rng(77);
  GridMeta meta;
  meta.dims[0] = meta.dims[1] = 3;
  meta.dims[2] = 2;
  meta.origin = Eigen::Vector3d(-1.2, -1.2, 0.5);
  meta.voxel_size = Eigen::Vector3d(0.8, 0.8, 0.8);
  Camera cam = oracle_camera(32, 32);
  cam.pose.translation = Eigen::Vector3d(0, 0, 4.0);  // grid in front of the camera
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    VoxelGrid grid = VoxelGrid::create(meta, 6, rng, 1.0);
    AnchorMlp mlp = AnchorMlp::create(6, 8, 2, 0, rng);
    std::normal_distribution<double> nd(0.0, 0.6);
    for (auto& [name, t] : mlp.parameters()) {
      for (int64_t i = 0; i < t.numel(); ++i) {
        const_cast<ad::Tensor&>(t).mutable_data()[i] += nd(rng);
      }
    }
    const DecodedGaussians decoded = decode_primitives(grid, mlp);
    const RenderOptions opts = RenderOptions::exact();
    const RenderOutputs a = render(filter_gaussians(decoded), cam, opts);
    const RenderOutputs b = render(clamp_gaussians(decoded), cam, opts);
    for (int64_t i = 0; i < a.color.numel(); ++i) {
      worst = std::max(worst, std::fabs(a.color.data()[i] - b.color.data()[i]));
    }
    for (int64_t i = 0; i < a.alpha.numel(); ++i) {
      worst = std::max(worst, std::fabs(a.alpha.data()[i] - b.alpha.data()[i]));
      worst = std::max(worst, std::fabs(a.depth_raw.data()[i] - b.depth_raw.data()[i]));
    }
  }
  std::ostringstream os;
  os << "20 primitive sets, max |filtered - clamped| " << worst;
  detail = os.str();
  return worst < 1e-12;
}

// ---------------------------------------------------------------------------
// Criterion 4: reconstruction fitting with a held-out camera.
// ---------------------------------------------------------------------------
SceneSpec fitting_spec() {
  SceneSpec spec;
  spec.image_width = spec.image_height = 128;
  spec.rig_count = 5;  // cameras 0-3 train, camera 4 is held out
  spec.frame_count = 3;
  spec.rig_radius = 0.7;
  spec.rig_height = 4.5;
  spec.fov_deg = 30.0;
  spec.rig_target = Eigen::Vector3d(0, 0, 0);
  spec.rig_velocity = Eigen::Vector3d(0.9, 0.5, 0.0);
  // Low-contrast checker: textured enough for photometric consistency to
  // resolve depth, gentle enough that resampling blur at the checker edges
  // does not dominate PSNR.
  spec.plane_cell = 1.2;
  spec.plane_color_a = Eigen::Vector3d(0.72, 0.70, 0.67);
  spec.plane_color_b = Eigen::Vector3d(0.60, 0.62, 0.65);
  spec.grid.dims[0] = spec.grid.dims[1] = 8;
  spec.grid.dims[2] = 3;
  spec.grid.origin = Eigen::Vector3d(-2.4, -2.4, 0);
  spec.grid.voxel_size = Eigen::Vector3d(0.6, 0.6, 0.45);
  SceneObject sphere;
  sphere.kind = SceneObject::Kind::Sphere;
  sphere.center = Eigen::Vector3d(0.3, -0.2, 0.6);
  sphere.half_extent = Eigen::Vector3d(0.45, 0.45, 0.45);
  sphere.albedo = Eigen::Vector3d(0.85, 0.3, 0.25);
  spec.objects.push_back(sphere);
  SceneObject box;
  box.kind = SceneObject::Kind::Box;
  box.center = Eigen::Vector3d(-0.6, 0.5, 0.35);
  box.half_extent = Eigen::Vector3d(0.35, 0.35, 0.35);
  box.albedo = Eigen::Vector3d(0.25, 0.45, 0.85);
  spec.objects.push_back(box);
  return spec;
}

TrainConfig fitting_config(int64_t steps, double w_pc) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.w_vel = 0;
  cfg.w_pc = w_pc;
  cfg.channels = 8;
  cfg.hidden = 16;
  cfg.vel_hidden = 8;
  cfg.gaussians_per_anchor = 2;
  cfg.deterministic = true;
  cfg.preview_every = 100000;
  cfg.checkpoint_every = 100000;
  return cfg;
}

struct FitEval {
  double psnr_train_mean = 0;  // mean over the four training views
  double psnr_train_min = 0;
  double mae_holdout = 0;  // held-out camera depth MAE, middle frame
};

FitEval evaluate_fit(const Model& model, const SceneSequence& seq, const RenderOptions& opts) {
  const SceneFrame& cur = seq.frames[1];
  const PrimitiveTensors prims = filter_gaussians(decode_primitives(model.grid, model.mlp));
  FitEval ev;
  ev.psnr_train_min = 1e9;
  for (size_t v = 0; v < cur.cameras.size(); ++v) {
    const RenderOutputs out = render(prims, cur.cameras[v], opts);
    if (v < 4) {
      ImageF img = ImageF::zeros(seq.intrinsics.width, seq.intrinsics.height);
      img.data.assign(out.color.data(), out.color.data() + out.color.numel());
      const double p = psnr(img, cur.images[v]);
      ev.psnr_train_mean += p / 4.0;
      ev.psnr_train_min = std::min(ev.psnr_train_min, p);
    } else {
      std::vector<double> depth(out.depth_norm.data(),
                                out.depth_norm.data() + out.depth_norm.numel());
      ev.mae_holdout = depth_mae(cur.depths[v], depth);
    }
  }
  return ev;
}

bool criterion_4(std::string& detail) {
  const Clock::time_point t0 = Clock::now();
  const SceneSequence seq = generate_scene(fitting_spec());
  SceneSequence train_seq = seq;
  for (SceneFrame& f : train_seq.frames) {
    f.cameras.resize(4);
    f.images.resize(4);
    f.depths.resize(4);
  }
  const int64_t steps = 1200;  // well inside the 2000-step budget

  const TrainConfig cfg_img = fitting_config(steps, 0.0);
  const TrainResult run_img = train(cfg_img, train_seq, (work_dir() / "fit_img").string());
  const FitEval ev_img = evaluate_fit(run_img.model, seq, cfg_img.render);

  const TrainConfig cfg_pc = fitting_config(steps, 1.0);
  const TrainResult run_pc = train(cfg_pc, train_seq, (work_dir() / "fit_pc").string());
  const FitEval ev_pc = evaluate_fit(run_pc.model, seq, cfg_pc.render);

  const double wall = seconds_since(t0);
  const double improvement = (ev_img.mae_holdout - ev_pc.mae_holdout) / ev_img.mae_holdout;
  std::ostringstream os;
  os << "w_pc=0: train PSNR mean " << ev_img.psnr_train_mean << " dB (min "
     << ev_img.psnr_train_min << ") at step " << steps << "; held-out depth MAE "
     << ev_img.mae_holdout << " -> " << ev_pc.mae_holdout << " with L_pc ("
     << 100.0 * improvement << "% better); " << wall << " s";
  detail = os.str();
  return ev_img.psnr_train_mean >= 25.0 && improvement >= 0.20 && wall <= 900.0;
}

// ---------------------------------------------------------------------------
// Criterion 5: planted-velocity recovery through L_vel only.
// ---------------------------------------------------------------------------
SceneSpec velocity_spec() {
  SceneSpec spec;
  spec.image_width = spec.image_height = 64;
  spec.rig_count = 4;
  spec.frame_count = 3;
  // One voxel of travel per frame: the ground-truth warp is then an exact
  // integer translation of the feature grid, so the planted velocity is a
  // strong minimum of L_vel rather than being blurred away by trilinear
  // resampling.
  spec.dt = 0.6;
  spec.rig_radius = 0.25;
  spec.rig_height = 4.5;
  spec.fov_deg = 60.0;  // every grid cell is observed; static cells anchor to zero
  spec.rig_target = Eigen::Vector3d(0, 0, 0);
  spec.rig_velocity = Eigen::Vector3d::Zero();
  spec.plane_cell = 0.7;
  spec.plane_color_a = Eigen::Vector3d(0.72, 0.70, 0.67);
  spec.plane_color_b = Eigen::Vector3d(0.60, 0.62, 0.65);
  spec.grid.dims[0] = spec.grid.dims[1] = 10;
  spec.grid.dims[2] = 3;
  spec.grid.origin = Eigen::Vector3d(-3.0, -3.0, 0);
  spec.grid.voxel_size = Eigen::Vector3d(0.6, 0.6, 0.45);
  SceneObject sphere;
  sphere.kind = SceneObject::Kind::Sphere;
  sphere.center = Eigen::Vector3d(0.0, 0.0, 0.7);
  sphere.half_extent = Eigen::Vector3d(0.62, 0.62, 0.62);
  sphere.albedo = Eigen::Vector3d(0.85, 0.3, 0.25);
  sphere.velocity = Eigen::Vector3d(1.0, 0, 0);
  spec.objects.push_back(sphere);
  return spec;
}

bool criterion_5(std::string& detail) {
  const Clock::time_point t0 = Clock::now();
  const SceneSequence seq = generate_scene(velocity_spec());

  TrainConfig cfg = fitting_config(1000, 0.0);  // image-only pre-fit
  TrainResult fit = train(cfg, seq, (work_dir() / "vel_fit").string());

  const SceneFrame& cur = seq.frames[1];
  const SceneFrame& prev = seq.frames[0];
  const SceneFrame& next = seq.frames[2];
  AdamW opt;
  opt.lr = 1e-2;
  opt.weight_decay = 0.01;
  const NamedParams head_params = fit.model.head.parameters();
  const int vel_steps = 400;
  for (int s = 0; s < vel_steps; ++s) {
    for (auto& [name, t] : head_params) const_cast<ad::Tensor&>(t).zero_grad();
    ad::Tape tape;
    const ad::Tensor vel = predict_velocity(fit.model.grid, fit.model.head, true);
    const ad::Tensor loss = ad::scale(
        ad::add(velocity_loss(fit.model.grid, vel, fit.model.mlp, prev.cameras, prev.images,
                              prev.timestamp - cur.timestamp, cfg.render),
                velocity_loss(fit.model.grid, vel, fit.model.mlp, next.cameras, next.images,
                              next.timestamp - cur.timestamp, cfg.render)),
        0.5);
    tape.backward(loss);
    opt.lr = 1e-2 * (s < vel_steps / 2 ? 1.0 : (s < 3 * vel_steps / 4 ? 0.2 : 0.05));
    opt.step(head_params);
  }

  const ad::Tensor vel = predict_velocity(fit.model.grid, fit.model.head, false);
  const std::vector<double> pred(vel.data(), vel.data() + vel.numel());
  const VelocityReport rep = velocity_report(pred, cur.gt_velocity);
  const double wall = seconds_since(t0);
  std::ostringstream os;
  os << "inside " << rep.inside_cells << " cells: |v| " << rep.pred_speed << " vs planted "
     << rep.gt_speed << ", angle " << rep.angle_deg << " deg, static mean "
     << rep.static_mean_speed << " m/s; " << wall << " s";
  detail = os.str();
  const bool speed_ok = std::fabs(rep.pred_speed - rep.gt_speed) <= 0.15 * rep.gt_speed;
  return speed_ok && rep.angle_deg <= 15.0 && rep.static_mean_speed < 0.1 && wall <= 600.0;
}

// ---------------------------------------------------------------------------
// Criterion 6: L_vel gradients are exactly zero off the velocity head.
// ---------------------------------------------------------------------------
bool criterion_6(std::string& detail) {
  SceneSpec spec;
  spec.image_width = spec.image_height = 16;
  spec.rig_count = 2;
  spec.frame_count = 3;
  spec.grid.dims[0] = spec.grid.dims[1] = 3;
  spec.grid.dims[2] = 2;
  spec.grid.origin = Eigen::Vector3d(-1.2, -1.2, 0);
  spec.grid.voxel_size = Eigen::Vector3d(0.8, 0.8, 0.6);
  SceneObject obj;
  obj.kind = SceneObject::Kind::Sphere;
  obj.center = Eigen::Vector3d(0, 0, 0.6);
  obj.half_extent = Eigen::Vector3d(0.5, 0.5, 0.5);
  obj.velocity = Eigen::Vector3d(0.3, 0, 0);
  spec.objects.push_back(obj);
  const SceneSequence seq = generate_scene(spec);

  TrainConfig cfg = fitting_config(1, 0.0);
  std::mt19937_64 rng(29);
  Model model = create_model(seq.grid, cfg, rng);
  // Generic parameter point: wake the zero-initialized head layers.
  std::normal_distribution<double> nd(0.0, 0.05);
  for (auto& [name, t] : model.parameters()) {
    for (int64_t i = 0; i < t.numel(); ++i) {
      const_cast<ad::Tensor&>(t).mutable_data()[i] += nd(rng);
    }
  }

  const SceneFrame& cur = seq.frames[1];
  ad::Tape tape;
  const ad::Tensor vel = predict_velocity(model.grid, model.head, true);
  const ad::Tensor loss =
      velocity_loss(model.grid, vel, model.mlp, seq.frames[2].cameras, seq.frames[2].images,
                    seq.frames[2].timestamp - cur.timestamp, cfg.render);
  tape.backward(loss);

  double head_mag = 0;
  for (auto& [name, t] : model.parameters()) {
    const bool is_head = name.rfind("vel.", 0) == 0;
    for (int64_t i = 0; i < t.numel(); ++i) {
      const double g = t.grad()[i];
      if (is_head) {
        head_mag += std::fabs(g);
      } else if (g != 0.0) {
        std::ostringstream os;
        os << "parameter " << name << "[" << i << "] received " << g << " from L_vel";
        detail = os.str();
        return false;
      }
    }
  }
  std::ostringstream os;
  os << "grid + decoder grads identically zero; head |grad|_1 = " << head_mag;
  detail = os.str();
  return head_mag > 0.0;
}

// ---------------------------------------------------------------------------
// Criterion 7: Eq. 8 defaults and total_loss(1,1,1) = 2.5.
// ---------------------------------------------------------------------------
bool criterion_7(std::string& detail) {
  const TrainConfig cfg;
  const ad::Tensor one_a = ad::Tensor::scalar(1.0);
  const ad::Tensor one_b = ad::Tensor::scalar(1.0);
  const ad::Tensor one_c = ad::Tensor::scalar(1.0);
  const double total = total_loss(one_a, one_b, one_c, cfg.w_img, cfg.w_vel, cfg.w_pc).item();
  std::ostringstream os;
  os << "(w_img, w_vel, w_pc) = (" << cfg.w_img << ", " << cfg.w_vel << ", " << cfg.w_pc
     << "), total_loss(1,1,1) = " << total;
  detail = os.str();
  return cfg.w_img == 0.5 && cfg.w_vel == 1.0 && cfg.w_pc == 1.0 && total == 2.5;
}

// ---------------------------------------------------------------------------
// Criterion 8: photometric identity suite.
// ---------------------------------------------------------------------------
SceneSpec identity_plane_spec() {
  SceneSpec spec;
  spec.image_width = spec.image_height = 48;
  spec.rig_count = 1;
  spec.frame_count = 3;
  spec.plane_cell = 2.0;
  // Nadir camera, uniform depth: the rig velocity is solved so the frame-to-
  // frame image shift is exactly two pixels, making ground-truth reprojection
  // land on source pixel centers.
  spec.rig_radius = 0.0;
  spec.rig_height = 4.0;
  spec.rig_target = Eigen::Vector3d(0, 0, 0);
  const double fx = 0.5 * spec.image_width / std::tan(0.5 * spec.fov_deg * M_PI / 180.0);
  spec.rig_velocity = Eigen::Vector3d(2.0 * spec.rig_height / (fx * spec.dt), 0, 0);
  return spec;
}

bool criterion_8(std::string& detail) {
  // (a) Identity-pose reprojection is the identity on pixel coordinates:
  // sampling back through any positive depth reproduces the source exactly.
  std::mt19937_64 rng(31);
  const int w = 12, h = 9;
  ImageF src = ImageF::zeros(w, h);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (double& v : src.data) v = u01(rng);
  // Dyadic depths and focal length keep every multiply/divide in the
  // unproject-reproject chain exact, so the identity holds at the bit level.
  std::vector<double> depth(static_cast<size_t>(w) * h);
  std::uniform_int_distribution<int> exp2d(-1, 3);
  for (double& d : depth) d = std::ldexp(1.0, exp2d(rng));
  Pose identity;
  identity.rotation = Eigen::Matrix3d::Identity();
  identity.translation = Eigen::Vector3d::Zero();
  Intrinsics k;
  k.width = w;
  k.height = h;
  k.fx = k.fy = 16.0;
  k.cx = 0.5 * w;
  k.cy = 0.5 * h;
  const Reprojection re =
      reproject(image_to_hwc_tensor(src), ad::Tensor({w * h, 1}, depth), identity, k);
  for (size_t i = 0; i < src.data.size(); ++i) {
    if (re.color.data()[i] != src.data[i]) {
      detail = "identity reprojection not exact at sample " + std::to_string(i);
      return false;
    }
  }

  // (b) GT depth closes the static-scene loop: interior L_pc < 1e-3.
  const SceneSequence seq = generate_scene(identity_plane_spec());
  const SceneFrame& cur = seq.frames[1];
  const Intrinsics& kk = seq.intrinsics;
  const int ww = kk.width, hh = kk.height, margin = 3;
  double worst_pc = 0;
  for (int neighbor : {0, 2}) {
    const SceneFrame& nb = seq.frames[static_cast<size_t>(neighbor)];
    std::vector<double> gt_depth(static_cast<size_t>(ww) * hh);
    for (size_t i = 0; i < gt_depth.size(); ++i) gt_depth[i] = cur.depths[0].data[i];
    const Pose t_rel = relative_pose(cur.cameras[0].pose, nb.cameras[0].pose);
    const Reprojection r = reproject(image_to_hwc_tensor(nb.images[0]),
                                     ad::Tensor({ww * hh, 1}, gt_depth), t_rel, kk);
    const ad::Tensor map =
        photometric_map(image_to_tensor(cur.images[0]), r.color, hh, ww, 0.85);
    double acc = 0;
    int64_t n = 0;
    for (int y = margin; y < hh - margin; ++y) {
      for (int x = margin; x < ww - margin; ++x) {
        const size_t i = static_cast<size_t>(y) * ww + x;
        if (!r.mask[i]) continue;
        acc += map.data()[i];
        ++n;
      }
    }
    if (n == 0) {
      detail = "no valid interior pixels";
      return false;
    }
    worst_pc = std::max(worst_pc, acc / static_cast<double>(n));
  }

  // (c) SSIM(a, a) is identically 1.
  const ad::Tensor img = image_to_tensor(cur.images[0]);
  const ad::Tensor s = ssim(img, img, hh, ww);
  double ssim_dev = 0;
  for (int64_t i = 0; i < s.numel(); ++i) ssim_dev = std::max(ssim_dev, std::fabs(s.data()[i] - 1.0));
  std::ostringstream os;
  os << "identity reprojection bit-exact; GT-depth interior L_pc " << worst_pc
     << "; max |SSIM(a,a) - 1| " << ssim_dev;
  detail = os.str();
  return worst_pc < 1e-3 && ssim_dev == 0.0;
}

// ---------------------------------------------------------------------------
// Criterion 9: bitwise-deterministic metrics logs.
// ---------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool criterion_9(std::string& detail) {
  SceneSpec spec;
  spec.image_width = spec.image_height = 24;
  spec.rig_count = 2;
  spec.frame_count = 3;
  spec.grid.dims[0] = spec.grid.dims[1] = 3;
  spec.grid.dims[2] = 2;
  spec.grid.origin = Eigen::Vector3d(-1.2, -1.2, 0);
  spec.grid.voxel_size = Eigen::Vector3d(0.8, 0.8, 0.6);
  SceneObject obj;
  obj.kind = SceneObject::Kind::Sphere;
  obj.center = Eigen::Vector3d(0, 0, 0.6);
  obj.half_extent = Eigen::Vector3d(0.5, 0.5, 0.5);
  spec.objects.push_back(obj);
  const SceneSequence seq = generate_scene(spec);

  TrainConfig cfg = fitting_config(25, 1.0);
  cfg.w_vel = 1.0;
  cfg.channels = 6;
  cfg.hidden = 8;
  cfg.vel_hidden = 6;
  cfg.gaussians_per_anchor = 1;
  cfg.seed = 5;

  const fs::path dir_a = work_dir() / "det_a", dir_b = work_dir() / "det_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  train(cfg, seq, dir_a.string());
  train(cfg, seq, dir_b.string());
  const std::string log_a = slurp(dir_a / "metrics.csv"), log_b = slurp(dir_b / "metrics.csv");
  std::ostringstream os;
  os << "two 25-step runs, metrics.csv " << log_a.size() << " bytes, "
     << (log_a == log_b ? "bitwise identical" : "DIFFER");
  detail = os.str();
  return !log_a.empty() && log_a == log_b;
}

// ---------------------------------------------------------------------------
// Criterion 10: format round-trips.
// ---------------------------------------------------------------------------
bool criterion_10(std::string& detail) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const fs::path dir = work_dir();

  // PFM: bit-exact floats.
  MapF map;
  map.width = 17;
  map.height = 11;
  map.data.resize(static_cast<size_t>(map.width) * map.height);
  for (float& v : map.data) v = static_cast<float>(u01(rng) * 100.0 - 20.0);
  write_pfm((dir / "rt.pfm").string(), map);
  const MapF map2 = read_pfm((dir / "rt.pfm").string());
  if (map2.width != map.width || map2.height != map.height ||
      std::memcmp(map2.data.data(), map.data.data(), map.data.size() * sizeof(float)) != 0) {
    detail = "PFM round trip not bit-exact";
    return false;
  }

  // PNG: within 8-bit quantization (1/510 per channel).
  ImageF img = ImageF::zeros(19, 13);
  for (double& v : img.data) v = u01(rng);
  write_png((dir / "rt.png").string(), img);
  const ImageF img2 = read_png((dir / "rt.png").string());
  double png_err = 0;
  for (size_t i = 0; i < img.data.size(); ++i) {
    png_err = std::max(png_err, std::fabs(img.data[i] - img2.data[i]));
  }
  if (png_err > 1.0 / 510.0 + 1e-12) {
    detail = "PNG round trip error " + std::to_string(png_err);
    return false;
  }

  // Checkpoint: bit-exact tensors, step, and config echo.
  Checkpoint ck;
  ck.step = 1234;
  ck.config_echo = "steps = 1234\nseed = 7\n";
  Checkpoint::Entry e;
  e.shape = {3, 4};
  for (int i = 0; i < 12; ++i) e.data.push_back(u01(rng) * 2.0 - 1.0);
  ck.tensors["grid.features"] = e;
  Checkpoint::Entry s;
  s.shape = {1};
  s.data = {0.125};
  ck.tensors["vel.b2"] = s;
  save_checkpoint((dir / "rt.vxs").string(), ck);
  const Checkpoint ck2 = load_checkpoint((dir / "rt.vxs").string());
  if (ck2.step != ck.step || ck2.config_echo != ck.config_echo ||
      ck2.tensors.size() != ck.tensors.size()) {
    detail = "checkpoint metadata round trip failed";
    return false;
  }
  for (const auto& [name, entry] : ck.tensors) {
    const auto it = ck2.tensors.find(name);
    if (it == ck2.tensors.end() || it->second.shape != entry.shape ||
        std::memcmp(it->second.data.data(), entry.data.data(),
                    entry.data.size() * sizeof(double)) != 0) {
      detail = "checkpoint tensor " + name + " not bit-exact";
      return false;
    }
  }

  std::ostringstream os;
  os << "PFM bit-exact, PNG max err " << png_err << " <= 1/510, checkpoint bit-exact";
  detail = os.str();
  return true;
}

using CriterionFn = bool (*)(std::string&);

struct Criterion {
  int id;
  const char* title;
  CriterionFn fn;
};

const Criterion kCriteria[] = {
    {1, "gradient correctness", criterion_1},
    {2, "rasterizer oracle equivalence", criterion_2},
    {3, "gaussian filtering equivalence", criterion_3},
    {4, "reconstruction fitting", criterion_4},
    {5, "velocity recovery", criterion_5},
    {6, "gradient-flow partition", criterion_6},
    {7, "loss defaults", criterion_7},
    {8, "photometric identity suite", criterion_8},
    {9, "determinism", criterion_9},
    {10, "format round-trips", criterion_10},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) {
    only = std::atoi(argv[1]);
    if (only < 1 || only > 10) {
      std::fprintf(stderr, "usage: %s [criterion 1-10]\n", argv[0]);
      return 64;
    }
  }
  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& ex) {
      detail = std::string("exception: ") + ex.what();
    }
    std::printf("criterion %d (%s): %s — %s\n", c.id, c.title, ok ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
