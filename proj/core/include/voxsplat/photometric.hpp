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

#include <cstdint>
#include <vector>

#include "voxsplat/decoder.hpp"
#include "voxsplat/image_io.hpp"
#include "voxsplat/scene.hpp"
#include "voxsplat/tensor.hpp"

namespace voxsplat {

/// Incremented whenever a photometric loss sees an all-invalid mask (the
/// loss then evaluates to zero instead of failing).
extern int64_t g_empty_mask_count;

struct Reprojection {
  ad::Tensor color;                 // [H*W,3], sampled from the source view
  std::vector<unsigned char> mask;  // per target pixel: in front and on-image
};

/// Warps the source view into the target view through the target depth map:
/// unproject through K with depth, transform by t_rel (target camera frame
/// to source camera frame), project, sample bilinearly. Differentiable
/// w.r.t. depth (and src when it carries gradients).
Reprojection reproject(const ad::Tensor& src, const ad::Tensor& depth, const Pose& t_rel,
                       const Intrinsics& k);

/// Per-pixel channel-averaged SSIM map [H*W,1] in [-1,1]; 3x3 box-filter
/// window statistics, C1 = 0.01^2, C2 = 0.03^2.
ad::Tensor ssim(const ad::Tensor& a, const ad::Tensor& b, int height, int width);

/// Per-pixel photometric penalty alpha*(1-SSIM) + (1-alpha)*|diff|_1,
/// channel-averaged, shape [H*W,1].
ad::Tensor photometric_map(const ad::Tensor& target, const ad::Tensor& reproj, int height,
                           int width, double alpha_pc);

/// Masked mean of photometric_map. Empty mask gives zero and bumps
/// g_empty_mask_count.
ad::Tensor photometric_loss(const ad::Tensor& target, const ad::Tensor& reproj,
                            const std::vector<unsigned char>& mask, int height, int width,
                            double alpha_pc);

/// One current view against its temporal neighbors (same physical camera):
/// reproject each neighbor through `depth`, reduce the per-pixel penalty
/// across neighbors (mean default, min optional), then take the masked mean.
/// `depth` is injectable so ground-truth depth can stand in for the rendered
/// one in oracles.
ad::Tensor pc_view_loss(const ad::Tensor& depth, const Camera& cam_t, const ImageF& img_t,
                        const std::vector<Camera>& neighbor_cams,
                        const std::vector<ImageF>& neighbor_images, double alpha_pc,
                        bool min_reduce);

/// Full Eq.-style photometric consistency: renders depth_norm per view from
/// the decoded grid, then averages pc_view_loss across views. Gradients flow
/// into grid features and decoder parameters through the rendered depth.
ad::Tensor pc_loss_full(const VoxelGrid& grid, const AnchorMlp& mlp, const SceneFrame& current,
                        const std::vector<const SceneFrame*>& neighbors,
                        const RenderOptions& opts, double alpha_pc, bool min_reduce);

/// ImageF -> constant [H,W,3]-shaped tensor (for bilinear sampling).
ad::Tensor image_to_hwc_tensor(const ImageF& img);

}  // namespace voxsplat
