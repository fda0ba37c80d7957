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

#include "voxsplat/photometric.hpp"

#include <stdexcept>

#include "voxsplat/motion.hpp"
#include "voxsplat/ops.hpp"

namespace voxsplat {

using ad::Tensor;

int64_t g_empty_mask_count = 0;

namespace {

constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

Tensor channel_mean(const Tensor& a) {  // [N,3] -> [N,1]
  static const double third = 1.0 / 3.0;
  return ad::matmul(a, Tensor({3, 1}, {third, third, third}));
}

Tensor camera_rays(const Intrinsics& k) {
  const int64_t n = static_cast<int64_t>(k.height) * k.width;
  std::vector<double> rays(static_cast<size_t>(n) * 3);
  size_t i = 0;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      rays[i++] = (x + 0.5 - k.cx) / k.fx;
      rays[i++] = (y + 0.5 - k.cy) / k.fy;
      rays[i++] = 1.0;
    }
  return Tensor({n, 3}, std::move(rays));
}

}  // namespace

Tensor image_to_hwc_tensor(const ImageF& img) {
  return Tensor({img.height, img.width, 3}, std::vector<double>(img.data));
}

Reprojection reproject(const Tensor& src, const Tensor& depth, const Pose& t_rel,
                       const Intrinsics& k) {
  const int64_t n = static_cast<int64_t>(k.height) * k.width;
  if (depth.numel() != n) throw std::invalid_argument("reproject: depth/intrinsics mismatch");

  const Tensor p_t = ad::mul_col(camera_rays(k), ad::reshape(depth, {n}));
  // Row-vector convention: p' = p * R_rel^T + t_rel.
  std::vector<double> rt(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rt[static_cast<size_t>(r * 3 + c)] = t_rel.rotation(c, r);
  const Tensor p_s = ad::add_rowvec(
      ad::matmul(p_t, Tensor({3, 3}, std::move(rt))),
      Tensor({3}, {t_rel.translation.x(), t_rel.translation.y(), t_rel.translation.z()}));

  const Tensor z = ad::slice_cols(p_s, 2, 3);
  const Tensor z_safe = ad::clamp(z, kNearPlane, 1e12);
  const Tensor xy = ad::slice_cols(p_s, 0, 2);
  const Tensor uv = ad::add_rowvec(
      ad::mul_rowvec(ad::div(xy, ad::concat_cols({z_safe, z_safe})), Tensor({2}, {k.fx, k.fy})),
      Tensor({2}, {k.cx, k.cy}));

  Reprojection out;
  out.color = ad::bilinear_sample(src, uv, &out.mask);
  for (int64_t i = 0; i < n; ++i) {
    if (z.data()[i] <= kNearPlane) out.mask[static_cast<size_t>(i)] = 0;
  }
  return out;
}

Tensor ssim(const Tensor& a, const Tensor& b, int height, int width) {
  if (a.shape() != b.shape()) throw std::invalid_argument("ssim: shape mismatch");
  const Tensor av = ad::reshape(a, {height, width, 3});
  const Tensor bv = ad::reshape(b, {height, width, 3});
  const Tensor mu_a = ad::box_filter3(av);
  const Tensor mu_b = ad::box_filter3(bv);
  const Tensor var_a = ad::sub(ad::box_filter3(ad::mul(av, av)), ad::mul(mu_a, mu_a));
  const Tensor var_b = ad::sub(ad::box_filter3(ad::mul(bv, bv)), ad::mul(mu_b, mu_b));
  const Tensor cov = ad::sub(ad::box_filter3(ad::mul(av, bv)), ad::mul(mu_a, mu_b));
  const Tensor num = ad::mul(ad::add_scalar(ad::scale(ad::mul(mu_a, mu_b), 2.0), kSsimC1),
                             ad::add_scalar(ad::scale(cov, 2.0), kSsimC2));
  const Tensor den = ad::mul(
      ad::add_scalar(ad::add(ad::mul(mu_a, mu_a), ad::mul(mu_b, mu_b)), kSsimC1),
      ad::add_scalar(ad::add(var_a, var_b), kSsimC2));
  const int64_t n = static_cast<int64_t>(height) * width;
  return channel_mean(ad::reshape(ad::div(num, den), {n, 3}));
}

Tensor photometric_map(const Tensor& target, const Tensor& reproj, int height, int width,
                       double alpha_pc) {
  if (alpha_pc < 0.0 || alpha_pc > 1.0) {
    throw std::invalid_argument("photometric: alpha must be in [0,1]");
  }
  const Tensor one_minus_ssim =
      ad::add_scalar(ad::scale(ssim(target, reproj, height, width), -1.0), 1.0);
  const Tensor l1 = channel_mean(ad::abs(ad::sub(target, reproj)));
  return ad::add(ad::scale(one_minus_ssim, alpha_pc), ad::scale(l1, 1.0 - alpha_pc));
}

namespace {

Tensor masked_mean(const Tensor& map, const std::vector<unsigned char>& mask) {
  int64_t count = 0;
  for (unsigned char m : mask) count += m ? 1 : 0;
  if (count == 0) {
    ++g_empty_mask_count;
    return Tensor::scalar(0.0);
  }
  std::vector<double> w(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) w[i] = mask[i] ? 1.0 / count : 0.0;
  return ad::sum(ad::mul(map, Tensor({static_cast<int64_t>(mask.size()), 1}, std::move(w))));
}

}  // namespace

Tensor photometric_loss(const Tensor& target, const Tensor& reproj,
                        const std::vector<unsigned char>& mask, int height, int width,
                        double alpha_pc) {
  return masked_mean(photometric_map(target, reproj, height, width, alpha_pc), mask);
}

Tensor pc_view_loss(const Tensor& depth, const Camera& cam_t, const ImageF& img_t,
                    const std::vector<Camera>& neighbor_cams,
                    const std::vector<ImageF>& neighbor_images, double alpha_pc,
                    bool min_reduce) {
  if (neighbor_cams.empty() || neighbor_cams.size() != neighbor_images.size()) {
    throw std::invalid_argument("pc_view_loss: need >= 1 neighbor with matching cameras");
  }
  const Intrinsics& k = cam_t.intrinsics;
  const int64_t n = static_cast<int64_t>(k.height) * k.width;
  const Tensor target = image_to_tensor(img_t);

  std::vector<Tensor> maps;
  std::vector<std::vector<unsigned char>> masks;
  for (size_t i = 0; i < neighbor_cams.size(); ++i) {
    const Pose t_rel = relative_pose(cam_t.pose, neighbor_cams[i].pose);
    Reprojection rp = reproject(image_to_hwc_tensor(neighbor_images[i]), depth, t_rel, k);
    maps.push_back(photometric_map(target, rp.color, k.height, k.width, alpha_pc));
    masks.push_back(std::move(rp.mask));
  }

  std::vector<unsigned char> any(static_cast<size_t>(n), 0);
  std::vector<double> valid_count(static_cast<size_t>(n), 0.0);
  for (const auto& m : masks)
    for (int64_t i = 0; i < n; ++i)
      if (m[static_cast<size_t>(i)]) {
        any[static_cast<size_t>(i)] = 1;
        valid_count[static_cast<size_t>(i)] += 1.0;
      }

  Tensor combined;
  if (min_reduce) {
    // Invalid entries are pushed to +inf-like values so min ignores them;
    // pixels with no valid neighbor are dropped by the outer mask anyway.
    for (size_t i = 0; i < maps.size(); ++i) {
      std::vector<double> gate(static_cast<size_t>(n)), pad(static_cast<size_t>(n));
      for (int64_t j = 0; j < n; ++j) {
        const bool ok = masks[i][static_cast<size_t>(j)] != 0;
        gate[static_cast<size_t>(j)] = ok ? 1.0 : 0.0;
        pad[static_cast<size_t>(j)] = ok ? 0.0 : 1e18;
      }
      const Tensor gated = ad::add(ad::mul(maps[i], Tensor({n, 1}, std::move(gate))),
                                   Tensor({n, 1}, std::move(pad)));
      combined = combined.defined() ? ad::minimum(combined, gated) : gated;
    }
  } else {
    for (size_t i = 0; i < maps.size(); ++i) {
      std::vector<double> w(static_cast<size_t>(n), 0.0);
      for (int64_t j = 0; j < n; ++j) {
        if (masks[i][static_cast<size_t>(j)]) w[static_cast<size_t>(j)] = 1.0 / valid_count[static_cast<size_t>(j)];
      }
      const Tensor part = ad::mul(maps[i], Tensor({n, 1}, std::move(w)));
      combined = combined.defined() ? ad::add(combined, part) : part;
    }
  }
  return masked_mean(combined, any);
}

Tensor pc_loss_full(const VoxelGrid& grid, const AnchorMlp& mlp, const SceneFrame& current,
                    const std::vector<const SceneFrame*>& neighbors, const RenderOptions& opts,
                    double alpha_pc, bool min_reduce) {
  if (neighbors.empty()) throw std::invalid_argument("pc_loss_full: no temporal neighbors");
  const PrimitiveTensors prims = filter_gaussians(decode_primitives(grid, mlp));
  Tensor acc;
  for (size_t v = 0; v < current.cameras.size(); ++v) {
    const RenderOutputs r = render(prims, current.cameras[v], opts);
    std::vector<Camera> cams;
    std::vector<ImageF> imgs;
    for (const SceneFrame* nb : neighbors) {
      cams.push_back(nb->cameras[v]);
      imgs.push_back(nb->images[v]);
    }
    const Tensor term = pc_view_loss(r.depth_norm, current.cameras[v], current.images[v], cams,
                                     imgs, alpha_pc, min_reduce);
    acc = acc.defined() ? ad::add(acc, term) : term;
  }
  return ad::scale(acc, 1.0 / static_cast<double>(current.cameras.size()));
}

}  // namespace voxsplat
