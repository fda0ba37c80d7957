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

#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "voxsplat/checkpoint.hpp"
#include "voxsplat/config.hpp"
#include "voxsplat/decoder.hpp"
#include "voxsplat/rasterizer.hpp"
#include "voxsplat/scene.hpp"

namespace voxsplat {

struct TrainConfig {
  double w_img = 0.5, w_vel = 1.0, w_pc = 1.0;
  double lr = 2e-4;          // decoder / velocity head
  double grid_lr = 2e-2;     // feature grid (stands in for the backbone)
  double weight_decay = 0.01;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int64_t steps = 2000;
  int current_frame = -1;    // -1: middle of the sequence
  int mask_size = 32;
  double mask_ratio = 0.0;
  int sh_degree = 0;
  int gaussians_per_anchor = 2;
  int64_t channels = 16;
  int64_t hidden = 32;
  int64_t vel_hidden = 16;
  uint64_t seed = 0;
  double alpha_pc = 0.85;
  bool min_reduce = false;
  bool deterministic = false;  // log wall_ms as 0 for bitwise replay
  int64_t checkpoint_every = 500;
  int64_t preview_every = 50;
  RenderOptions render;

  void validate() const;
  static TrainConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_key_values() const;
};

struct Model {
  VoxelGrid grid;
  AnchorMlp mlp;
  VelocityHead head;
  NamedParams parameters() const;
  NamedParams velocity_parameters() const { return head.parameters(); }
};

Model create_model(const GridMeta& meta, const TrainConfig& cfg, std::mt19937_64& rng);

/// AdamW with decoupled weight decay. Moments are keyed by parameter name;
/// names starting with "grid." use `grid_lr`, everything else `lr`.
struct AdamW {
  double lr = 2e-4, grid_lr = 2e-2;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.01;
  int64_t step_count = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments;

  /// One update over all parameters from their accumulated grads. Throws on
  /// any non-finite gradient, leaving parameters untouched.
  void step(const NamedParams& params);
};

/// Mean absolute error over all views, pixels, channels.
ad::Tensor l1_image_loss(const std::vector<ad::Tensor>& rendered,
                         const std::vector<ImageF>& targets);

/// w_img*L_img + w_vel*L_vel + w_pc*L_pc; undefined loss tensors count as 0.
ad::Tensor total_loss(const ad::Tensor& l_img, const ad::Tensor& l_vel, const ad::Tensor& l_pc,
                      double w_img, double w_vel, double w_pc);

/// Zeroes floor(ratio * patch_count) distinct patch_size^2 patches per image
/// (partial edge patches included in the tiling). Returns masked copies;
/// `masked_patches`, when given, records the chosen patch indices per image.
std::vector<ImageF> mask_images(const std::vector<ImageF>& images, int patch_size, double ratio,
                                std::mt19937_64& rng,
                                std::vector<std::vector<int>>* masked_patches = nullptr);

/// Model/optimizer snapshot (optimizer moments ride along as "__opt."
/// tensors, the step counter as "__step").
Checkpoint model_to_checkpoint(const Model& model, const AdamW& opt, int64_t step,
                               const std::string& config_echo);
void model_from_checkpoint(const Checkpoint& ckpt, Model& model, AdamW* opt, int64_t* step);

struct TrainResult {
  Model model;
  AdamW opt;
  int64_t steps_done = 0;
  double final_loss = 0;
};

/// Pre-training loop. Writes `metrics.csv`, periodic checkpoints
/// (`ckpt_<step>.vxs`, final `ckpt_final.vxs`) and preview renders into
/// `out_dir`. Set `resume` to continue from an existing state (step
/// numbering continues).
TrainResult train(const TrainConfig& cfg, const SceneSequence& data, const std::string& out_dir,
                  const TrainResult* resume = nullptr);

}  // namespace voxsplat
