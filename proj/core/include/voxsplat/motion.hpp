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

#include "voxsplat/decoder.hpp"
#include "voxsplat/image_io.hpp"
#include "voxsplat/rasterizer.hpp"

namespace voxsplat {

/// Backward warping: each destination cell center samples the source grid at
/// destination-minus-flow, with velocity queried at the destination cell.
/// Zero-padded outside the volume; dt = 0 is the exact identity.
VoxelGrid warp_voxels(const VoxelGrid& grid, const ad::Tensor& vel, double dt);

/// Adjacent-frame rendering loss for one temporal neighbor at t + dt.
/// Grid features and the decoder MLP are stop-gradient wrapped, so the loss
/// gradient reaches only the velocity head (through `vel`). Returns the mean
/// L1 color error over views and pixels.
ad::Tensor velocity_loss(const VoxelGrid& grid_t, const ad::Tensor& vel, const AnchorMlp& mlp,
                         const std::vector<Camera>& cameras, const std::vector<ImageF>& images,
                         double dt, const RenderOptions& opts);

/// Converts an ImageF into a constant [H*W,3] target tensor.
ad::Tensor image_to_tensor(const ImageF& img);

}  // namespace voxsplat
