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

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "voxsplat/rasterizer.hpp"
#include "voxsplat/scene.hpp"
#include "voxsplat/tensor.hpp"

namespace voxsplat {

using NamedParams = std::vector<std::pair<std::string, ad::Tensor>>;

/// Trainable dense feature volume. The grid itself is the optimizable scene
/// representation; anchors sit at cell centers.
struct VoxelGrid {
  GridMeta meta;
  ad::Tensor features;  // [X,Y,Z,C]

  int64_t channels() const { return features.defined() ? features.shape().back() : 0; }
  static VoxelGrid create(const GridMeta& meta, int64_t channels, std::mt19937_64& rng,
                          double stddev = 0.1);
};

/// Constant [X*Y*Z, 3] tensor of world-space cell centers, x-major / z-minor
/// order (matches the flattened feature layout).
ad::Tensor anchor_centers(const GridMeta& meta);

/// 2-layer ReLU perceptron decoding each anchor's feature vector into G
/// primitives. Per primitive the raw output is (offset 3, scale 3,
/// rotation 4, opacity 1, color 3*(d+1)^2).
struct AnchorMlp {
  ad::Tensor w1, b1, w2, b2;
  int gaussians_per_anchor = 2;
  int sh_degree = 0;

  static int64_t primitive_width(int sh_degree) {
    return 3 + 3 + 4 + 1 + 3 * (sh_degree + 1) * (sh_degree + 1);
  }
  int64_t output_width() const {
    return gaussians_per_anchor * primitive_width(sh_degree);
  }
  static AnchorMlp create(int64_t channels, int64_t hidden, int gaussians_per_anchor,
                          int sh_degree, std::mt19937_64& rng);
  /// Copy whose parameters are stop-gradient wrapped (frozen inside L_vel).
  AnchorMlp frozen() const;
  NamedParams parameters(const std::string& prefix = "mlp.") const;
};

/// decode_primitives output before opacity filtering. `prims.opacities` is
/// left undefined; filtering decides the survivor set from `opacity_raw`.
struct DecodedGaussians {
  ad::Tensor positions;    // [M,3]
  ad::Tensor scales;       // [M,3]
  ad::Tensor rotations;    // [M,4] unit rows
  ad::Tensor opacity_raw;  // [M]   tanh output in [-1,1]
  ad::Tensor colors;       // [M, 3*(d+1)^2], DC sigmoid-activated
  int64_t count() const { return positions.defined() ? positions.dim(0) : 0; }
};

/// Anchor decoding: position = center + 0.5*voxel_size (*) tanh(o);
/// scale = clamp(softplus(s)*scale_unit, 1e-4, 2*max(voxel_size));
/// rotation row-normalized with identity fallback. Differentiable end to
/// end. Throws on feature/MLP width mismatch.
DecodedGaussians decode_primitives(const VoxelGrid& grid, const AnchorMlp& mlp);

/// Keeps primitives with opacity_raw > 0; survivors carry
/// opacity = opacity_raw. Order-preserving, idempotent by construction.
PrimitiveTensors filter_gaussians(const DecodedGaussians& decoded);

/// Full-set variant for the filtering-equivalence oracle: every primitive
/// kept, opacity = max(opacity_raw, 0).
PrimitiveTensors clamp_gaussians(const DecodedGaussians& decoded);

/// Per-voxel velocity regressor: 2-layer MLP, then a Conv3d(3->8, k=3) ->
/// per-volume norm -> ReLU -> Conv3d(8->3, k=1) refinement added back onto
/// the MLP output. Final layers are zero-initialized so the initial field is
/// exactly zero while gradients still flow.
struct VelocityHead {
  ad::Tensor w1, b1, w2, b2;          // MLP, w2/b2 zero at init
  ad::Tensor conv1_w, conv1_b;        // [8,3,3,3,3], [8]
  ad::Tensor gamma, beta;             // norm affine, [8]
  ad::Tensor conv2_w, conv2_b;        // [3,8,1,1,1], [3], zero at init
  std::vector<double> running_mean, running_var;  // frozen-mode statistics

  static VelocityHead create(int64_t channels, int64_t hidden, std::mt19937_64& rng);
  NamedParams parameters(const std::string& prefix = "vel.") const;
};

/// [X,Y,Z,3] world-frame velocities (m/s). `training` selects per-volume
/// batch statistics (updating the head's running buffers) vs frozen ones.
ad::Tensor predict_velocity(const VoxelGrid& grid, VelocityHead& head, bool training);

}  // namespace voxsplat
