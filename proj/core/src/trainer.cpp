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

#include "voxsplat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "voxsplat/motion.hpp"
#include "voxsplat/ops.hpp"
#include "voxsplat/photometric.hpp"

namespace voxsplat {

using ad::Tensor;

void TrainConfig::validate() const {
  if (w_img < 0 || w_vel < 0 || w_pc < 0) throw std::invalid_argument("train: weights must be >= 0");
  if (steps < 1) throw std::invalid_argument("train: steps must be >= 1");
  if (lr <= 0 || grid_lr <= 0) throw std::invalid_argument("train: learning rates must be positive");
  if (mask_ratio < 0 || mask_ratio >= 1) throw std::invalid_argument("train: mask_ratio must be in [0,1)");
  if (mask_size < 1) throw std::invalid_argument("train: mask_size must be >= 1");
  if (sh_degree != 0 && sh_degree != 1) throw std::invalid_argument("train: sh_degree must be 0 or 1");
  if (gaussians_per_anchor < 1 || gaussians_per_anchor > 8) {
    throw std::invalid_argument("train: gaussians_per_anchor must be in [1,8]");
  }
  if (alpha_pc < 0 || alpha_pc > 1) throw std::invalid_argument("train: alpha_pc must be in [0,1]");
  if (channels < 1 || hidden < 1 || vel_hidden < 1) {
    throw std::invalid_argument("train: layer widths must be >= 1");
  }
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  TrainConfig c;
  c.w_img = cfg.get_double("train.w_img", c.w_img);
  c.w_vel = cfg.get_double("train.w_vel", c.w_vel);
  c.w_pc = cfg.get_double("train.w_pc", c.w_pc);
  c.lr = cfg.get_double("train.lr", c.lr);
  c.grid_lr = cfg.get_double("train.grid_lr", c.grid_lr);
  c.weight_decay = cfg.get_double("train.weight_decay", c.weight_decay);
  c.steps = cfg.get_int("train.steps", c.steps);
  c.current_frame = static_cast<int>(cfg.get_int("train.current_frame", c.current_frame));
  c.mask_size = static_cast<int>(cfg.get_int("train.mask_size", c.mask_size));
  c.mask_ratio = cfg.get_double("train.mask_ratio", c.mask_ratio);
  c.sh_degree = static_cast<int>(cfg.get_int("train.sh_degree", c.sh_degree));
  c.gaussians_per_anchor =
      static_cast<int>(cfg.get_int("train.gaussians_per_anchor", c.gaussians_per_anchor));
  c.channels = cfg.get_int("train.channels", c.channels);
  c.hidden = cfg.get_int("train.hidden", c.hidden);
  c.vel_hidden = cfg.get_int("train.vel_hidden", c.vel_hidden);
  c.seed = static_cast<uint64_t>(cfg.get_int("train.seed", static_cast<int64_t>(c.seed)));
  c.alpha_pc = cfg.get_double("train.alpha_pc", c.alpha_pc);
  c.min_reduce = cfg.get_bool("train.min_reduce", c.min_reduce);
  c.deterministic = cfg.get_bool("train.deterministic", c.deterministic);
  c.checkpoint_every = cfg.get_int("train.checkpoint_every", c.checkpoint_every);
  c.preview_every = cfg.get_int("train.preview_every", c.preview_every);
  c.render.sh_degree = c.sh_degree;
  c.render.cutoff = cfg.get_double("train.cutoff", c.render.cutoff);
  c.validate();
  return c;
}

KeyValueConfig TrainConfig::to_key_values() const {
  KeyValueConfig cfg;
  auto num = [](double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
  };
  cfg.set("train.w_img", num(w_img));
  cfg.set("train.w_vel", num(w_vel));
  cfg.set("train.w_pc", num(w_pc));
  cfg.set("train.lr", num(lr));
  cfg.set("train.grid_lr", num(grid_lr));
  cfg.set("train.weight_decay", num(weight_decay));
  cfg.set("train.steps", std::to_string(steps));
  cfg.set("train.current_frame", std::to_string(current_frame));
  cfg.set("train.mask_size", std::to_string(mask_size));
  cfg.set("train.mask_ratio", num(mask_ratio));
  cfg.set("train.sh_degree", std::to_string(sh_degree));
  cfg.set("train.gaussians_per_anchor", std::to_string(gaussians_per_anchor));
  cfg.set("train.channels", std::to_string(channels));
  cfg.set("train.hidden", std::to_string(hidden));
  cfg.set("train.vel_hidden", std::to_string(vel_hidden));
  cfg.set("train.seed", std::to_string(seed));
  cfg.set("train.alpha_pc", num(alpha_pc));
  cfg.set("train.min_reduce", min_reduce ? "true" : "false");
  cfg.set("train.deterministic", deterministic ? "true" : "false");
  cfg.set("train.checkpoint_every", std::to_string(checkpoint_every));
  cfg.set("train.preview_every", std::to_string(preview_every));
  cfg.set("train.cutoff", num(render.cutoff));
  return cfg;
}

NamedParams Model::parameters() const {
  NamedParams out = {{"grid.features", grid.features}};
  for (auto& p : mlp.parameters()) out.push_back(p);
  for (auto& p : head.parameters()) out.push_back(p);
  return out;
}

Model create_model(const GridMeta& meta, const TrainConfig& cfg, std::mt19937_64& rng) {
  Model m;
  m.grid = VoxelGrid::create(meta, cfg.channels, rng);
  m.mlp = AnchorMlp::create(cfg.channels, cfg.hidden, cfg.gaussians_per_anchor, cfg.sh_degree, rng);
  m.head = VelocityHead::create(cfg.channels, cfg.vel_hidden, rng);
  return m;
}

void AdamW::step(const NamedParams& params) {
  for (const auto& [name, t] : params) {
    const double* g = t.grad();
    for (int64_t i = 0; i < t.numel(); ++i) {
      if (!std::isfinite(g[i])) {
        throw std::runtime_error("adamw: non-finite gradient in '" + name + "', step aborted");
      }
    }
  }
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (const auto& [name, t] : params) {
    auto& [m, v] = moments[name];
    const size_t n = static_cast<size_t>(t.numel());
    if (m.size() != n) {
      m.assign(n, 0.0);
      v.assign(n, 0.0);
    }
    const double* g = t.grad();
    double* p = const_cast<Tensor&>(t).mutable_data();
    const double rate = name.rfind("grid.", 0) == 0 ? grid_lr : lr;
    for (size_t i = 0; i < n; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= rate * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p[i]);
    }
  }
}

Tensor l1_image_loss(const std::vector<Tensor>& rendered, const std::vector<ImageF>& targets) {
  if (rendered.size() != targets.size() || rendered.empty()) {
    throw std::invalid_argument("l1_image_loss: view count mismatch");
  }
  Tensor acc;
  for (size_t v = 0; v < rendered.size(); ++v) {
    if (rendered[v].numel() != static_cast<int64_t>(targets[v].data.size())) {
      throw std::invalid_argument("l1_image_loss: image shape mismatch");
    }
    const Tensor term = ad::mean(ad::abs(ad::sub(rendered[v], image_to_tensor(targets[v]))));
    acc = acc.defined() ? ad::add(acc, term) : term;
  }
  return ad::scale(acc, 1.0 / static_cast<double>(rendered.size()));
}

Tensor total_loss(const Tensor& l_img, const Tensor& l_vel, const Tensor& l_pc, double w_img,
                  double w_vel, double w_pc) {
  Tensor acc;
  auto accumulate = [&](const Tensor& t, double w) {
    if (!t.defined() || w == 0.0) return;
    const Tensor term = ad::scale(t, w);
    acc = acc.defined() ? ad::add(acc, term) : term;
  };
  accumulate(l_img, w_img);
  accumulate(l_vel, w_vel);
  accumulate(l_pc, w_pc);
  return acc.defined() ? acc : Tensor::scalar(0.0);
}

std::vector<ImageF> mask_images(const std::vector<ImageF>& images, int patch_size, double ratio,
                                std::mt19937_64& rng,
                                std::vector<std::vector<int>>* masked_patches) {
  if (patch_size < 1) throw std::invalid_argument("mask_images: patch_size must be >= 1");
  if (ratio < 0 || ratio >= 1) throw std::invalid_argument("mask_images: ratio must be in [0,1)");
  if (masked_patches) masked_patches->clear();
  std::vector<ImageF> out;
  for (const ImageF& img : images) {
    ImageF masked = img;
    const int px = (img.width + patch_size - 1) / patch_size;
    const int py = (img.height + patch_size - 1) / patch_size;
    const int total = px * py;
    const int k = static_cast<int>(std::floor(ratio * total));
    std::vector<int> order(static_cast<size_t>(total));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(static_cast<size_t>(k));
    for (int patch : order) {
      const int x0 = (patch % px) * patch_size, y0 = (patch / px) * patch_size;
      for (int y = y0; y < std::min(y0 + patch_size, img.height); ++y)
        for (int x = x0; x < std::min(x0 + patch_size, img.width); ++x)
          for (int c = 0; c < 3; ++c) masked.at(x, y, c) = 0.0;
    }
    if (masked_patches) masked_patches->push_back(order);
    out.push_back(std::move(masked));
  }
  return out;
}

Checkpoint model_to_checkpoint(const Model& model, const AdamW& opt, int64_t step,
                               const std::string& config_echo) {
  Checkpoint ckpt;
  ckpt.step = static_cast<uint64_t>(step);
  ckpt.config_echo = config_echo;
  for (const auto& [name, t] : model.parameters()) {
    ckpt.tensors[name] = {t.shape(), t.values()};
  }
  ckpt.tensors["vel.running_mean"] = {{static_cast<int64_t>(model.head.running_mean.size())},
                                      model.head.running_mean};
  ckpt.tensors["vel.running_var"] = {{static_cast<int64_t>(model.head.running_var.size())},
                                     model.head.running_var};
  for (const auto& [name, mv] : opt.moments) {
    ckpt.tensors["__opt." + name + ".m"] = {{static_cast<int64_t>(mv.first.size())}, mv.first};
    ckpt.tensors["__opt." + name + ".v"] = {{static_cast<int64_t>(mv.second.size())}, mv.second};
  }
  ckpt.tensors["__opt.step_count"] = {{1}, {static_cast<double>(opt.step_count)}};
  return ckpt;
}

void model_from_checkpoint(const Checkpoint& ckpt, Model& model, AdamW* opt, int64_t* step) {
  for (auto& [name, t] : model.parameters()) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    if (static_cast<int64_t>(it->second.data.size()) != t.numel()) {
      throw std::runtime_error("checkpoint: size mismatch for '" + name + "'");
    }
    std::copy(it->second.data.begin(), it->second.data.end(),
              const_cast<Tensor&>(t).mutable_data());
  }
  if (ckpt.has("vel.running_mean")) model.head.running_mean = ckpt.tensors.at("vel.running_mean").data;
  if (ckpt.has("vel.running_var")) model.head.running_var = ckpt.tensors.at("vel.running_var").data;
  if (opt) {
    for (auto& [name, t] : model.parameters()) {
      const std::string mkey = "__opt." + name + ".m", vkey = "__opt." + name + ".v";
      if (ckpt.has(mkey) && ckpt.has(vkey)) {
        opt->moments[name] = {ckpt.tensors.at(mkey).data, ckpt.tensors.at(vkey).data};
      }
      (void)t;
    }
    if (ckpt.has("__opt.step_count")) {
      opt->step_count = static_cast<int64_t>(ckpt.tensors.at("__opt.step_count").data[0]);
    }
  }
  if (step) *step = static_cast<int64_t>(ckpt.step);
}

TrainResult train(const TrainConfig& cfg, const SceneSequence& data, const std::string& out_dir,
                  const TrainResult* resume) {
  namespace fs = std::filesystem;
  cfg.validate();
  const bool needs_neighbors = cfg.w_vel > 0 || cfg.w_pc > 0;
  if (data.frames.empty() || (needs_neighbors && data.frames.size() < 3)) {
    throw std::invalid_argument("train: dataset needs >= 3 frames for temporal losses");
  }
  int cur = cfg.current_frame;
  if (cur < 0) cur = static_cast<int>(data.frames.size()) / 2;
  if (cur >= static_cast<int>(data.frames.size())) throw std::invalid_argument("train: frame index out of range");
  if (needs_neighbors && (cur < 1 || cur + 1 >= static_cast<int>(data.frames.size()))) {
    throw std::invalid_argument("train: current frame needs both temporal neighbors");
  }
  const SceneFrame& current = data.frames[static_cast<size_t>(cur)];
  const SceneFrame* prev = needs_neighbors ? &data.frames[static_cast<size_t>(cur - 1)] : nullptr;
  const SceneFrame* next = needs_neighbors ? &data.frames[static_cast<size_t>(cur + 1)] : nullptr;

  fs::create_directories(out_dir);
  std::mt19937_64 rng(cfg.seed);

  TrainResult res;
  int64_t step0 = 0;
  if (resume) {
    res.model = resume->model;
    res.opt = resume->opt;
    step0 = resume->steps_done;
  } else {
    res.model = create_model(data.grid, cfg, rng);
    res.opt.lr = cfg.lr;
    res.opt.grid_lr = cfg.grid_lr;
    res.opt.beta1 = cfg.beta1;
    res.opt.beta2 = cfg.beta2;
    res.opt.eps = cfg.adam_eps;
    res.opt.weight_decay = cfg.weight_decay;
  }
  const NamedParams params = res.model.parameters();
  const std::string echo = cfg.to_key_values().to_string();

  std::ofstream log(fs::path(out_dir) / "metrics.csv", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("train: cannot open metrics log in " + out_dir);
  if (!resume) log << "step,L,L_img,L_vel,L_pc,wall_ms\n";
  log.precision(17);

  auto save = [&](const std::string& name, int64_t step) {
    save_checkpoint((fs::path(out_dir) / name).string(),
                    model_to_checkpoint(res.model, res.opt, step, echo));
  };

  for (int64_t step = step0; step < step0 + cfg.steps; ++step) {
    const auto t_start = std::chrono::steady_clock::now();
    for (auto& [name, t] : params) const_cast<Tensor&>(t).zero_grad();

    double v_img = 0, v_vel = 0, v_pc = 0, v_total = 0;
    std::vector<double> preview_color, preview_depth;
    {
      ad::Tape tape;
      Tensor l_img, l_vel, l_pc;
      if (cfg.w_img > 0) {
        const PrimitiveTensors prims =
            filter_gaussians(decode_primitives(res.model.grid, res.model.mlp));
        std::vector<Tensor> rendered;
        for (const Camera& cam : current.cameras) {
          const RenderOutputs out = render(prims, cam, cfg.render);
          if (rendered.empty()) {
            preview_color = out.color.values();
            preview_depth = out.depth_norm.values();
          }
          rendered.push_back(out.color);
        }
        const std::vector<ImageF> targets =
            cfg.mask_ratio > 0
                ? mask_images(current.images, cfg.mask_size, cfg.mask_ratio, rng)
                : current.images;
        l_img = l1_image_loss(rendered, targets);
      }
      if (cfg.w_vel > 0) {
        const Tensor vel = predict_velocity(res.model.grid, res.model.head, /*training=*/true);
        const Tensor lv_prev =
            velocity_loss(res.model.grid, vel, res.model.mlp, prev->cameras, prev->images,
                          prev->timestamp - current.timestamp, cfg.render);
        const Tensor lv_next =
            velocity_loss(res.model.grid, vel, res.model.mlp, next->cameras, next->images,
                          next->timestamp - current.timestamp, cfg.render);
        l_vel = ad::scale(ad::add(lv_prev, lv_next), 0.5);
      }
      if (cfg.w_pc > 0) {
        l_pc = pc_loss_full(res.model.grid, res.model.mlp, current, {prev, next}, cfg.render,
                            cfg.alpha_pc, cfg.min_reduce);
      }
      const Tensor loss = total_loss(l_img, l_vel, l_pc, cfg.w_img, cfg.w_vel, cfg.w_pc);
      v_img = l_img.defined() ? l_img.item() : 0;
      v_vel = l_vel.defined() ? l_vel.item() : 0;
      v_pc = l_pc.defined() ? l_pc.item() : 0;
      v_total = loss.item();
      tape.backward(loss);
    }
    res.opt.step(params);
    res.final_loss = v_total;

    const double wall_ms =
        cfg.deterministic
            ? 0.0
            : std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
                  .count();
    log << step << "," << v_total << "," << v_img << "," << v_vel << "," << v_pc << ","
        << wall_ms << "\n";

    const int64_t done = step + 1;
    if (cfg.preview_every > 0 && done % cfg.preview_every == 0 && !preview_color.empty()) {
      const Intrinsics& k = current.cameras[0].intrinsics;
      ImageF img = ImageF::zeros(k.width, k.height);
      for (size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = std::clamp(preview_color[i], 0.0, 1.0);
      }
      write_png((fs::path(out_dir) / ("preview_" + std::to_string(done) + ".png")).string(), img);
      MapF d;
      d.width = k.width;
      d.height = k.height;
      d.data.resize(preview_depth.size());
      for (size_t i = 0; i < preview_depth.size(); ++i) d.data[i] = static_cast<float>(preview_depth[i]);
      write_pfm((fs::path(out_dir) / ("preview_" + std::to_string(done) + "_depth.pfm")).string(), d);
    }
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0) {
      save("ckpt_" + std::to_string(done) + ".vxs", done);
    }
  }
  res.steps_done = step0 + cfg.steps;
  save("ckpt_final.vxs", res.steps_done);
  log.flush();
  return res;
}

}  // namespace voxsplat
