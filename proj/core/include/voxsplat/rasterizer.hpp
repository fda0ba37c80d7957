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

#include <vector>

#include "voxsplat/gaussians.hpp"
#include "voxsplat/geometry.hpp"
#include "voxsplat/tensor.hpp"

namespace voxsplat {

struct RenderOptions {
  double lambda_lp = 0.3;       // low-pass regularization, px^2
  double cutoff = 3.0;          // sigma multiplier for tile culling
  double termination = 1e-4;    // stop compositing once T drops below this
  double alpha_clamp = 0.999;   // keeps transmittance strictly positive
  double eps_norm = 1e-8;       // depth_norm denominator stabilizer
  int tile = 16;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  int sh_degree = 0;  // 0 or 1

  /// Disables the cutoff and early-termination approximations so the tiled
  /// path matches the brute-force reference to float64 roundoff.
  static RenderOptions exact() {
    RenderOptions o;
    o.cutoff = 12.0;
    o.termination = 0.0;
    return o;
  }
};

/// Per-pixel outputs of a render, plain values.
struct RenderedFrame {
  int width = 0, height = 0;
  std::vector<double> color;       // H*W*3, row-major
  std::vector<double> depth_raw;   // H*W, alpha-weighted depth sum
  std::vector<double> depth_norm;  // H*W, depth_raw / (alpha + eps)
  std::vector<double> alpha;       // H*W

  double& at_color(int x, int y, int c) { return color[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at_color(int x, int y, int c) const { return color[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

/// Primitive fields as differentiable tensors, one row per gaussian.
struct PrimitiveTensors {
  ad::Tensor positions;  // [N,3] world
  ad::Tensor rotations;  // [N,4] quaternions (w,x,y,z), normalized by the op
  ad::Tensor scales;     // [N,3] positive
  ad::Tensor opacities;  // [N]
  ad::Tensor colors;     // [N, 3*(d+1)^2]

  int64_t count() const { return positions.defined() ? positions.dim(0) : 0; }
};

/// Tensor outputs of the differentiable render.
struct RenderOutputs {
  ad::Tensor color;       // [H*W, 3]
  ad::Tensor depth_raw;   // [H*W, 1]
  ad::Tensor depth_norm;  // [H*W, 1]
  ad::Tensor alpha;       // [H*W, 1]
  RenderedFrame to_frame(const Intrinsics& K) const;
};

/// Counters for primitives dropped on the way to the screen.
struct RenderStats {
  int64_t culled_near = 0;
  int64_t culled_offscreen = 0;
  int64_t skipped_singular = 0;
};

/// Tile-based differentiable splatting. Gradients of any scalar of the
/// outputs flow back to every primitive tensor through the active tape.
RenderOutputs render(const PrimitiveTensors& prims, const Camera& camera,
                     const RenderOptions& opts, RenderStats* stats = nullptr);

/// Naive per-pixel reference: no tiles, no cutoff, no early termination,
/// composed from the unfused covariance/projection/weight operations.
RenderedFrame render_bruteforce(const std::vector<GaussianPrimitive>& prims,
                                const Camera& camera, const RenderOptions& opts);

/// Convenience: plain primitives -> tensors (no gradients).
PrimitiveTensors to_tensors(const std::vector<GaussianPrimitive>& prims, int sh_degree);

}  // namespace voxsplat
