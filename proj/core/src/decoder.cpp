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

#include "voxsplat/decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "voxsplat/ops.hpp"

namespace voxsplat {

using ad::Tensor;

VoxelGrid VoxelGrid::create(const GridMeta& meta, int64_t channels, std::mt19937_64& rng,
                            double stddev) {
  VoxelGrid g;
  g.meta = meta;
  g.features = Tensor::randn({meta.dims[0], meta.dims[1], meta.dims[2], channels}, rng, stddev,
                             /*requires_grad=*/true);
  return g;
}

Tensor anchor_centers(const GridMeta& meta) {
  const int64_t n = meta.cell_count();
  std::vector<double> data(static_cast<size_t>(n) * 3);
  int64_t row = 0;
  for (int64_t x = 0; x < meta.dims[0]; ++x)
    for (int64_t y = 0; y < meta.dims[1]; ++y)
      for (int64_t z = 0; z < meta.dims[2]; ++z, ++row) {
        const Eigen::Vector3d c = meta.cell_center(x, y, z);
        for (int ax = 0; ax < 3; ++ax) data[static_cast<size_t>(row) * 3 + ax] = c[ax];
      }
  return Tensor({n, 3}, std::move(data));
}

AnchorMlp AnchorMlp::create(int64_t channels, int64_t hidden, int gaussians_per_anchor,
                            int sh_degree, std::mt19937_64& rng) {
  if (gaussians_per_anchor < 1 || gaussians_per_anchor > 8) {
    throw std::invalid_argument("anchor mlp: G must be in [1,8]");
  }
  if (sh_degree != 0 && sh_degree != 1) throw std::invalid_argument("anchor mlp: d must be 0 or 1");
  AnchorMlp m;
  m.gaussians_per_anchor = gaussians_per_anchor;
  m.sh_degree = sh_degree;
  const int64_t out = m.output_width();
  m.w1 = Tensor::randn({channels, hidden}, rng, std::sqrt(2.0 / channels), true);
  m.b1 = Tensor::zeros({hidden}, true);
  m.w2 = Tensor::randn({hidden, out}, rng, 0.1 / std::sqrt(static_cast<double>(hidden)), true);
  // Quaternion w starts at 1 (healthy row norm for the normalization,
  // near-identity rotations); opacity starts positive so an untrained
  // decoder renders something.
  std::vector<double> b2(static_cast<size_t>(out), 0.0);
  const int64_t p = primitive_width(sh_degree);
  for (int g = 0; g < gaussians_per_anchor; ++g) {
    b2[static_cast<size_t>(g * p + 6)] = 1.0;
    b2[static_cast<size_t>(g * p + 10)] = 0.5;
  }
  m.b2 = Tensor({out}, std::move(b2), true);
  return m;
}

AnchorMlp AnchorMlp::frozen() const {
  AnchorMlp m = *this;
  m.w1 = ad::stop_gradient(w1);
  m.b1 = ad::stop_gradient(b1);
  m.w2 = ad::stop_gradient(w2);
  m.b2 = ad::stop_gradient(b2);
  return m;
}

NamedParams AnchorMlp::parameters(const std::string& prefix) const {
  return {{prefix + "w1", w1}, {prefix + "b1", b1}, {prefix + "w2", w2}, {prefix + "b2", b2}};
}

DecodedGaussians decode_primitives(const VoxelGrid& grid, const AnchorMlp& mlp) {
  if (!grid.features.defined() || grid.features.shape().size() != 4) {
    throw std::invalid_argument("decode: grid features must be [X,Y,Z,C]");
  }
  if (grid.channels() != mlp.w1.dim(0)) {
    throw std::invalid_argument("decode: feature width does not match the MLP input");
  }
  const GridMeta& meta = grid.meta;
  const int64_t n = meta.cell_count();
  const int64_t g = mlp.gaussians_per_anchor;
  const int64_t p = AnchorMlp::primitive_width(mlp.sh_degree);
  const int64_t m = n * g;

  const Tensor feat = ad::reshape(grid.features, {n, grid.channels()});
  const Tensor h = ad::relu(ad::add_rowvec(ad::matmul(feat, mlp.w1), mlp.b1));
  const Tensor raw = ad::reshape(ad::add_rowvec(ad::matmul(h, mlp.w2), mlp.b2), {m, p});

  // Anchors repeated G times, matching the row-major [N, G*P] flattening.
  const Tensor centers = anchor_centers(meta);
  std::vector<double> rep(static_cast<size_t>(m) * 3);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t k = 0; k < g; ++k)
      for (int ax = 0; ax < 3; ++ax)
        rep[static_cast<size_t>((i * g + k) * 3 + ax)] = centers.data()[i * 3 + ax];
  const Tensor anchors({m, 3}, std::move(rep));

  const Tensor offset_max({3}, {0.5 * meta.voxel_size.x(), 0.5 * meta.voxel_size.y(),
                                0.5 * meta.voxel_size.z()});
  const double scale_unit = 0.5 * meta.voxel_size.mean();
  const double scale_max = 2.0 * meta.voxel_size.maxCoeff();

  DecodedGaussians out;
  out.positions = ad::add(anchors, ad::mul_rowvec(ad::tanh(ad::slice_cols(raw, 0, 3)), offset_max));
  out.scales = ad::clamp(ad::scale(ad::softplus(ad::slice_cols(raw, 3, 6)), scale_unit), 1e-4,
                         scale_max);
  out.rotations = ad::rownormalize(ad::slice_cols(raw, 6, 10), {1, 0, 0, 0});
  out.opacity_raw = ad::reshape(ad::tanh(ad::slice_cols(raw, 10, 11)), {m});
  const Tensor dc = ad::sigmoid(ad::slice_cols(raw, 11, 14));
  out.colors = (p > 14) ? ad::concat_cols({dc, ad::slice_cols(raw, 14, p)}) : dc;
  return out;
}

namespace {

std::vector<int64_t> survivor_rows(const Tensor& opacity_raw) {
  std::vector<int64_t> idx;
  for (int64_t i = 0; i < opacity_raw.numel(); ++i) {
    if (opacity_raw.data()[i] > 0.0) idx.push_back(i);
  }
  return idx;
}

}  // namespace

PrimitiveTensors filter_gaussians(const DecodedGaussians& decoded) {
  const std::vector<int64_t> idx = survivor_rows(decoded.opacity_raw);
  PrimitiveTensors out;
  out.positions = ad::index_rows(decoded.positions, idx);
  out.rotations = ad::index_rows(decoded.rotations, idx);
  out.scales = ad::index_rows(decoded.scales, idx);
  out.opacities = ad::reshape(
      ad::index_rows(ad::reshape(decoded.opacity_raw, {decoded.count(), 1}), idx),
      {static_cast<int64_t>(idx.size())});
  out.colors = ad::index_rows(decoded.colors, idx);
  return out;
}

PrimitiveTensors clamp_gaussians(const DecodedGaussians& decoded) {
  PrimitiveTensors out;
  out.positions = decoded.positions;
  out.rotations = decoded.rotations;
  out.scales = decoded.scales;
  out.opacities = ad::relu(decoded.opacity_raw);
  out.colors = decoded.colors;
  return out;
}

VelocityHead VelocityHead::create(int64_t channels, int64_t hidden, std::mt19937_64& rng) {
  VelocityHead h;
  h.w1 = Tensor::randn({channels, hidden}, rng, std::sqrt(2.0 / channels), true);
  h.b1 = Tensor::zeros({hidden}, true);
  h.w2 = Tensor::zeros({hidden, 3}, true);
  h.b2 = Tensor::zeros({3}, true);
  h.conv1_w = Tensor::randn({8, 3, 3, 3, 3}, rng, std::sqrt(2.0 / (3 * 27)), true);
  h.conv1_b = Tensor::zeros({8}, true);
  h.gamma = Tensor::full({8}, 1.0, true);
  h.beta = Tensor::zeros({8}, true);
  h.conv2_w = Tensor::zeros({3, 8, 1, 1, 1}, true);
  h.conv2_b = Tensor::zeros({3}, true);
  h.running_mean.assign(8, 0.0);
  h.running_var.assign(8, 1.0);
  return h;
}

NamedParams VelocityHead::parameters(const std::string& prefix) const {
  return {{prefix + "w1", w1},          {prefix + "b1", b1},
          {prefix + "w2", w2},          {prefix + "b2", b2},
          {prefix + "conv1_w", conv1_w}, {prefix + "conv1_b", conv1_b},
          {prefix + "gamma", gamma},    {prefix + "beta", beta},
          {prefix + "conv2_w", conv2_w}, {prefix + "conv2_b", conv2_b}};
}

ad::Tensor predict_velocity(const VoxelGrid& grid, VelocityHead& head, bool training) {
  if (grid.channels() != head.w1.dim(0)) {
    throw std::invalid_argument("velocity head: feature width mismatch");
  }
  const GridMeta& meta = grid.meta;
  const int64_t n = meta.cell_count();
  // The head reads the voxel features but never trains them: a velocity
  // dependent loss must reach only head parameters, so the input is detached.
  const Tensor feat = ad::reshape(ad::stop_gradient(grid.features), {n, grid.channels()});
  const Tensor hidden = ad::relu(ad::add_rowvec(ad::matmul(feat, head.w1), head.b1));
  const Tensor v0 = ad::reshape(ad::add_rowvec(ad::matmul(hidden, head.w2), head.b2),
                                {meta.dims[0], meta.dims[1], meta.dims[2], 3});
  const Tensor r1 = ad::conv3d(v0, head.conv1_w, head.conv1_b);
  const Tensor normed = ad::volume_norm(ad::reshape(r1, {n, 8}), head.gamma, head.beta, 1e-5,
                                        training, &head.running_mean, &head.running_var);
  const Tensor act = ad::reshape(ad::relu(normed), {meta.dims[0], meta.dims[1], meta.dims[2], 8});
  const Tensor r2 = ad::conv3d(act, head.conv2_w, head.conv2_b);
  return ad::add(r2, v0);
}

}  // namespace voxsplat
