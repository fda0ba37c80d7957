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

#include "voxsplat/motion.hpp"

#include <stdexcept>

#include "voxsplat/ops.hpp"

namespace voxsplat {

using ad::Tensor;

Tensor image_to_tensor(const ImageF& img) {
  return Tensor({static_cast<int64_t>(img.height) * img.width, 3},
                std::vector<double>(img.data));
}

VoxelGrid warp_voxels(const VoxelGrid& grid, const ad::Tensor& vel, double dt) {
  const GridMeta& meta = grid.meta;
  const int64_t n = meta.cell_count();
  if (!vel.defined() || vel.numel() != n * 3) {
    throw std::invalid_argument("warp_voxels: velocity shape does not match the grid");
  }
  // Destination indices in grid space; coords = index - vel*dt/voxel_size.
  // Built from the index tensor directly so dt = 0 reproduces cell centers
  // bit-exactly and the warp is the identity.
  std::vector<double> idx(static_cast<size_t>(n) * 3);
  int64_t row = 0;
  for (int64_t x = 0; x < meta.dims[0]; ++x)
    for (int64_t y = 0; y < meta.dims[1]; ++y)
      for (int64_t z = 0; z < meta.dims[2]; ++z, ++row) {
        idx[static_cast<size_t>(row) * 3 + 0] = static_cast<double>(x);
        idx[static_cast<size_t>(row) * 3 + 1] = static_cast<double>(y);
        idx[static_cast<size_t>(row) * 3 + 2] = static_cast<double>(z);
      }
  const Tensor indices({n, 3}, std::move(idx));
  const Tensor flow_scale({3}, {-dt / meta.voxel_size.x(), -dt / meta.voxel_size.y(),
                                -dt / meta.voxel_size.z()});
  const Tensor coords =
      ad::add(indices, ad::mul_rowvec(ad::reshape(vel, {n, 3}), flow_scale));

  VoxelGrid out;
  out.meta = meta;
  out.features = ad::reshape(ad::trilinear_sample(grid.features, coords),
                             {meta.dims[0], meta.dims[1], meta.dims[2], grid.channels()});
  return out;
}

Tensor velocity_loss(const VoxelGrid& grid_t, const ad::Tensor& vel, const AnchorMlp& mlp,
                     const std::vector<Camera>& cameras, const std::vector<ImageF>& images,
                     double dt, const RenderOptions& opts) {
  if (cameras.size() != images.size() || cameras.empty()) {
    throw std::invalid_argument("velocity_loss: camera/image count mismatch");
  }
  VoxelGrid frozen = grid_t;
  frozen.features = ad::stop_gradient(grid_t.features);
  const VoxelGrid warped = warp_voxels(frozen, vel, dt);
  const PrimitiveTensors prims = filter_gaussians(decode_primitives(warped, mlp.frozen()));

  Tensor acc;
  for (size_t v = 0; v < cameras.size(); ++v) {
    const RenderOutputs out = render(prims, cameras[v], opts);
    const Tensor term = ad::mean(ad::abs(ad::sub(out.color, image_to_tensor(images[v]))));
    acc = acc.defined() ? ad::add(acc, term) : term;
  }
  return ad::scale(acc, 1.0 / static_cast<double>(cameras.size()));
}

}  // namespace voxsplat
