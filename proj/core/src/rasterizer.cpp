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

#include "voxsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "voxsplat/ops.hpp"

namespace voxsplat {

namespace {

constexpr double kMinAlpha = 1e-12;

// One gaussian that survived projection, with everything the backward pass
// needs to avoid re-deriving the projection chain.
struct Prepared {
  int64_t index = 0;  // row in the input tensors
  Eigen::Vector3d p_cam;
  double u = 0, v = 0, z = 0;
  double conic_a = 0, conic_b = 0, conic_c = 0;
  double opacity = 0;
  Eigen::Vector3d rgb;           // clamped
  bool clamped[3] = {false, false, false};
  Eigen::Vector3d dir;           // unit camera->gaussian, degree 1 only
  double vlen = 0;
  bool dir_valid = false;
  Eigen::Matrix<double, 2, 3> J;
  Eigen::Matrix<double, 2, 3> M;  // J * R_w
  Eigen::Matrix<double, 2, 3> B;  // M * A
  Eigen::Matrix3d A;              // R_g * diag(s)
  Eigen::Matrix3d R_g;
  Eigen::Vector4d qn;             // normalized quaternion
  double qnorm = 0;
  bool q_fallback = false;
  PixelRect rect;
};

struct RenderContext {
  Camera camera;
  RenderOptions opts;
  int width = 0, height = 0;
  std::vector<Prepared> prepared;               // depth sorted
  std::vector<std::vector<int32_t>> tile_lists; // indices into prepared
  int tiles_x = 0, tiles_y = 0;
  std::vector<double> final_T;                  // per pixel
  std::vector<int32_t> n_contrib;               // per pixel, into tile list
  int color_width = 3;                          // coefficients per gaussian
};

Eigen::Matrix3d rotmat_from_unit_quat(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

// Gradient w.r.t. the unit quaternion from the rotation-matrix gradient.
Eigen::Vector4d rotmat_backward(const Eigen::Vector4d& q, const Eigen::Matrix3d& G) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d dRw, dRx, dRy, dRz;
  dRw << 0, -z, y, z, 0, -x, -y, x, 0;
  dRx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  dRy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  dRz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  Eigen::Vector4d g;
  g[0] = 2.0 * (G.cwiseProduct(dRw)).sum();
  g[1] = 2.0 * (G.cwiseProduct(dRx)).sum();
  g[2] = 2.0 * (G.cwiseProduct(dRy)).sum();
  g[3] = 2.0 * (G.cwiseProduct(dRz)).sum();
  return g;
}

// Projects the world-space gaussians to screen, filling ctx.prepared
// (depth sorted) and the per-tile intersection lists.
void prepare_gaussians(const PrimitiveTensors& prims, RenderContext& ctx, RenderStats* stats) {
  const Camera& cam = ctx.camera;
  const Intrinsics& K = cam.intrinsics;
  const int64_t n = prims.count();
  const double* pos = prims.positions.data();
  const double* quat = prims.rotations.data();
  const double* scl = prims.scales.data();
  const double* opa = prims.opacities.data();
  const double* col = prims.colors.data();
  const int cw = static_cast<int>(prims.colors.numel() / std::max<int64_t>(n, 1));
  ctx.color_width = cw;
  const Eigen::Vector3d cam_center = cam.pose.center();

  ctx.prepared.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    Prepared p;
    p.index = i;
    const Eigen::Vector3d mu(pos[i * 3], pos[i * 3 + 1], pos[i * 3 + 2]);
    p.p_cam = cam.pose.rotation * mu + cam.pose.translation;
    if (p.p_cam.z() <= kNearPlane) {
      if (stats) stats->culled_near++;
      continue;
    }
    p.z = p.p_cam.z();
    p.u = K.fx * p.p_cam.x() / p.z + K.cx;
    p.v = K.fy * p.p_cam.y() / p.z + K.cy;
    p.J = projection_jacobian(K, p.p_cam);
    p.M = p.J * cam.pose.rotation;

    Eigen::Vector4d q(quat[i * 4], quat[i * 4 + 1], quat[i * 4 + 2], quat[i * 4 + 3]);
    p.qnorm = q.norm();
    if (p.qnorm < 1e-8) {
      p.qn = Eigen::Vector4d(1, 0, 0, 0);
      p.q_fallback = true;
    } else {
      p.qn = q / p.qnorm;
    }
    p.R_g = rotmat_from_unit_quat(p.qn);
    p.A = p.R_g * Eigen::Vector3d(scl[i * 3], scl[i * 3 + 1], scl[i * 3 + 2]).asDiagonal();
    p.B = p.M * p.A;
    Eigen::Matrix2d cov2d = p.B * p.B.transpose();
    cov2d(0, 0) += ctx.opts.lambda_lp;
    cov2d(1, 1) += ctx.opts.lambda_lp;
    const double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
    if (det < 1e-12) {
      if (stats) stats->skipped_singular++;
      continue;
    }
    p.conic_a = cov2d(1, 1) / det;
    p.conic_b = -cov2d(0, 1) / det;
    p.conic_c = cov2d(0, 0) / det;
    p.opacity = opa[i];

    Eigen::Vector3d pre(col[i * cw], col[i * cw + 1], col[i * cw + 2]);
    if (ctx.opts.sh_degree >= 1 && cw >= 12) {
      const Eigen::Vector3d v = mu - cam_center;
      p.vlen = v.norm();
      if (p.vlen > 1e-12) {
        p.dir = v / p.vlen;
        p.dir_valid = true;
        for (int ch = 0; ch < 3; ++ch) {
          pre[ch] += kShC1 * (-p.dir.y() * col[i * cw + 3 + ch] +
                              p.dir.z() * col[i * cw + 6 + ch] -
                              p.dir.x() * col[i * cw + 9 + ch]);
        }
      }
    }
    for (int ch = 0; ch < 3; ++ch) {
      p.clamped[ch] = pre[ch] <= 0.0 || pre[ch] >= 1.0;
      p.rgb[ch] = std::min(1.0, std::max(0.0, pre[ch]));
    }

    p.rect = screen_bounds(Eigen::Vector2d(p.u, p.v), cov2d, ctx.opts.cutoff, ctx.width,
                           ctx.height);
    if (p.rect.empty()) {
      if (stats) stats->culled_offscreen++;
      continue;
    }
    ctx.prepared.push_back(p);
  }

  std::stable_sort(ctx.prepared.begin(), ctx.prepared.end(),
                   [](const Prepared& a, const Prepared& b) { return a.z < b.z; });

  const int tile = ctx.opts.tile;
  ctx.tiles_x = (ctx.width + tile - 1) / tile;
  ctx.tiles_y = (ctx.height + tile - 1) / tile;
  ctx.tile_lists.assign(static_cast<size_t>(ctx.tiles_x * ctx.tiles_y), {});
  for (int32_t pi = 0; pi < static_cast<int32_t>(ctx.prepared.size()); ++pi) {
    const PixelRect& r = ctx.prepared[static_cast<size_t>(pi)].rect;
    const int tx0 = r.x0 / tile, tx1 = (r.x1 - 1) / tile;
    const int ty0 = r.y0 / tile, ty1 = (r.y1 - 1) / tile;
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx)
        ctx.tile_lists[static_cast<size_t>(ty * ctx.tiles_x + tx)].push_back(pi);
  }
}

// Forward compositing into the [H*W, 5] bundle (rgb, depth_raw, alpha).
void composite_forward(RenderContext& ctx, std::vector<double>& bundle) {
  const int w = ctx.width, h = ctx.height, tile = ctx.opts.tile;
  const double qmax = 0.5 * ctx.opts.cutoff * ctx.opts.cutoff;
  ctx.final_T.assign(static_cast<size_t>(w * h), 1.0);
  ctx.n_contrib.assign(static_cast<size_t>(w * h), 0);
  for (int ty = 0; ty < ctx.tiles_y; ++ty) {
    for (int tx = 0; tx < ctx.tiles_x; ++tx) {
      const auto& list = ctx.tile_lists[static_cast<size_t>(ty * ctx.tiles_x + tx)];
      const int x_end = std::min(w, (tx + 1) * tile), y_end = std::min(h, (ty + 1) * tile);
      for (int y = ty * tile; y < y_end; ++y) {
        for (int x = tx * tile; x < x_end; ++x) {
          const double px = x + 0.5, py = y + 0.5;
          double T = 1.0;
          double cr = 0, cg = 0, cb = 0, dsum = 0, asum = 0;
          int32_t contrib = 0;
          for (size_t li = 0; li < list.size(); ++li) {
            const Prepared& g = ctx.prepared[static_cast<size_t>(list[li])];
            // Cheap reject; the rect contains the q <= qmax ellipse, so the
            // backward replay's q test alone reproduces this decision.
            if (x < g.rect.x0 || x >= g.rect.x1 || y < g.rect.y0 || y >= g.rect.y1) continue;
            const double dx = px - g.u, dy = py - g.v;
            const double q = 0.5 * (g.conic_a * dx * dx + 2 * g.conic_b * dx * dy +
                                    g.conic_c * dy * dy);
            if (q > qmax) continue;
            const double wgt = std::exp(-q);
            const double alpha = std::min(g.opacity * wgt, ctx.opts.alpha_clamp);
            if (alpha < kMinAlpha) continue;
            cr += g.rgb[0] * alpha * T;
            cg += g.rgb[1] * alpha * T;
            cb += g.rgb[2] * alpha * T;
            dsum += g.z * alpha * T;
            asum += alpha * T;
            T *= (1.0 - alpha);
            contrib = static_cast<int32_t>(li) + 1;
            if (T < ctx.opts.termination) break;
          }
          const size_t pix = static_cast<size_t>(y * w + x);
          ctx.final_T[pix] = T;
          ctx.n_contrib[pix] = contrib;
          bundle[pix * 5 + 0] = cr + ctx.opts.background[0] * T;
          bundle[pix * 5 + 1] = cg + ctx.opts.background[1] * T;
          bundle[pix * 5 + 2] = cb + ctx.opts.background[2] * T;
          bundle[pix * 5 + 3] = dsum;
          bundle[pix * 5 + 4] = asum;
        }
      }
    }
  }
}

struct GaussGrads {
  double u = 0, v = 0, z = 0;             // center / splat depth
  double conic[3] = {0, 0, 0};            // a, b, c (full-symmetric convention)
  double rgb[3] = {0, 0, 0};
  double opacity = 0;
};

// Stage 1: per-pixel compositing adjoints, accumulated per prepared gaussian.
void composite_backward(const RenderContext& ctx, const std::vector<double>& bundle_grad,
                        std::vector<GaussGrads>& grads) {
  const int w = ctx.width, tile = ctx.opts.tile;
  const double qmax = 0.5 * ctx.opts.cutoff * ctx.opts.cutoff;
  for (int ty = 0; ty < ctx.tiles_y; ++ty) {
    for (int tx = 0; tx < ctx.tiles_x; ++tx) {
      const auto& list = ctx.tile_lists[static_cast<size_t>(ty * ctx.tiles_x + tx)];
      if (list.empty()) continue;
      const int x_end = std::min(w, (tx + 1) * tile),
                y_end = std::min(ctx.height, (ty + 1) * tile);
      for (int y = ty * tile; y < y_end; ++y) {
        for (int x = tx * tile; x < x_end; ++x) {
          const size_t pix = static_cast<size_t>(y * w + x);
          const int32_t contrib = ctx.n_contrib[pix];
          if (contrib == 0) continue;
          const double* gout = bundle_grad.data() + pix * 5;
          const double gC[3] = {gout[0], gout[1], gout[2]};
          const double gD = gout[3];
          const double gA = gout[4];
          if (gC[0] == 0 && gC[1] == 0 && gC[2] == 0 && gD == 0 && gA == 0) continue;
          const double px = x + 0.5, py = y + 0.5;
          double T_behind = ctx.final_T[pix];
          // Suffix sums over everything behind the current gaussian; the
          // background ray carries color background * T_final.
          double acc_c[3] = {ctx.opts.background[0] * T_behind,
                             ctx.opts.background[1] * T_behind,
                             ctx.opts.background[2] * T_behind};
          double acc_d = 0;
          double acc_a = 0;
          for (int32_t li = contrib - 1; li >= 0; --li) {
            const Prepared& g = ctx.prepared[static_cast<size_t>(list[li])];
            const double dx = px - g.u, dy = py - g.v;
            const double q = 0.5 * (g.conic_a * dx * dx + 2 * g.conic_b * dx * dy +
                                    g.conic_c * dy * dy);
            if (q > qmax) continue;
            const double wgt = std::exp(-q);
            const double raw_alpha = g.opacity * wgt;
            const double alpha = std::min(raw_alpha, ctx.opts.alpha_clamp);
            if (alpha < kMinAlpha) continue;
            const double T_i = T_behind / (1.0 - alpha);
            GaussGrads& gg = grads[static_cast<size_t>(list[li])];
            // d(out)/d(alpha_i): own contribution minus everything it occludes.
            double galpha = gD * (g.z * T_i - acc_d / (1.0 - alpha)) +
                            gA * (T_i - acc_a / (1.0 - alpha));
            for (int ch = 0; ch < 3; ++ch) {
              galpha += gC[ch] * (g.rgb[ch] * T_i - acc_c[ch] / (1.0 - alpha));
              gg.rgb[ch] += gC[ch] * alpha * T_i;
            }
            gg.z += gD * alpha * T_i;
            if (raw_alpha < ctx.opts.alpha_clamp) {
              gg.opacity += galpha * wgt;
              const double gw = galpha * g.opacity;
              const double gq = -gw * wgt;
              gg.conic[0] += gq * 0.5 * dx * dx;
              gg.conic[1] += gq * dx * dy;
              gg.conic[2] += gq * 0.5 * dy * dy;
              const double gdx = gq * (g.conic_a * dx + g.conic_b * dy);
              const double gdy = gq * (g.conic_b * dx + g.conic_c * dy);
              gg.u -= gdx;
              gg.v -= gdy;
            }
            for (int ch = 0; ch < 3; ++ch) acc_c[ch] += g.rgb[ch] * alpha * T_i;
            acc_d += g.z * alpha * T_i;
            acc_a += alpha * T_i;
            T_behind = T_i;
          }
        }
      }
    }
  }
}

// Stage 2: chain per-gaussian screen-space adjoints to the input tensors.
void project_backward(const RenderContext& ctx, const PrimitiveTensors& prims,
                      const std::vector<GaussGrads>& grads, double* g_pos, double* g_quat,
                      double* g_scale, double* g_opa, double* g_col) {
  const Camera& cam = ctx.camera;
  const Intrinsics& K = cam.intrinsics;
  const double* scl = prims.scales.data();
  const double* col = prims.colors.data();
  const int cw = ctx.color_width;
  for (size_t pi = 0; pi < ctx.prepared.size(); ++pi) {
    const Prepared& p = ctx.prepared[pi];
    const GaussGrads& gg = grads[pi];
    const int64_t i = p.index;

    if (g_opa) g_opa[i] += gg.opacity;

    // Conic -> 2D covariance: P = cov^-1, dL/dcov = -P GP P.
    Eigen::Matrix2d P;
    P << p.conic_a, p.conic_b, p.conic_b, p.conic_c;
    Eigen::Matrix2d GP;
    GP << gg.conic[0], 0.5 * gg.conic[1], 0.5 * gg.conic[1], gg.conic[2];
    const Eigen::Matrix2d Gcov = -P * GP * P;

    // cov = B B^T + lambda I with B = M A.
    const Eigen::Matrix<double, 2, 3> gB = 2.0 * Gcov * p.B;
    const Eigen::Matrix<double, 2, 3> gM = gB * p.A.transpose();
    const Eigen::Matrix3d gA = p.M.transpose() * gB;
    const Eigen::Matrix<double, 2, 3> gJ = gM * cam.pose.rotation.transpose();

    // A = R_g diag(s).
    if (g_scale) {
      for (int k = 0; k < 3; ++k) {
        double acc = 0;
        for (int r = 0; r < 3; ++r) acc += gA(r, k) * p.R_g(r, k);
        g_scale[i * 3 + k] += acc;
      }
    }
    if (g_quat && !p.q_fallback) {
      Eigen::Matrix3d gR = Eigen::Matrix3d::Zero();
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) gR(r, k) = gA(r, k) * scl[i * 3 + k];
      const Eigen::Vector4d gqn = rotmat_backward(p.qn, gR);
      const Eigen::Vector4d gq = (gqn - p.qn * p.qn.dot(gqn)) / p.qnorm;
      for (int k = 0; k < 4; ++k) g_quat[i * 4 + k] += gq[k];
    }

    // Screen center, splat depth, and the projection Jacobian all pull on
    // the camera-space point.
    const double x = p.p_cam.x(), y = p.p_cam.y(), z = p.z;
    const double z2 = z * z;
    Eigen::Vector3d g_pcam = Eigen::Vector3d::Zero();
    g_pcam.x() += gg.u * K.fx / z + gJ(0, 2) * (-K.fx / z2);
    g_pcam.y() += gg.v * K.fy / z + gJ(1, 2) * (-K.fy / z2);
    g_pcam.z() += -gg.u * K.fx * x / z2 - gg.v * K.fy * y / z2 + gg.z +
                  gJ(0, 0) * (-K.fx / z2) + gJ(1, 1) * (-K.fy / z2) +
                  gJ(0, 2) * (2 * K.fx * x / (z2 * z)) + gJ(1, 2) * (2 * K.fy * y / (z2 * z));

    Eigen::Vector3d gmu = cam.pose.rotation.transpose() * g_pcam;

    // Color: clamp gate, then SH chain (degree 1 also pulls on the position
    // through the viewing direction).
    if (g_col) {
      Eigen::Vector3d g_dir = Eigen::Vector3d::Zero();
      for (int ch = 0; ch < 3; ++ch) {
        if (p.clamped[ch]) continue;
        const double gpre = gg.rgb[ch];
        g_col[i * cw + ch] += gpre;
        if (ctx.opts.sh_degree >= 1 && cw >= 12 && p.dir_valid) {
          g_col[i * cw + 3 + ch] += gpre * (-kShC1 * p.dir.y());
          g_col[i * cw + 6 + ch] += gpre * (kShC1 * p.dir.z());
          g_col[i * cw + 9 + ch] += gpre * (-kShC1 * p.dir.x());
          g_dir.x() += gpre * (-kShC1 * col[i * cw + 9 + ch]);
          g_dir.y() += gpre * (-kShC1 * col[i * cw + 3 + ch]);
          g_dir.z() += gpre * (kShC1 * col[i * cw + 6 + ch]);
        }
      }
      if (p.dir_valid && g_dir.squaredNorm() > 0) {
        gmu += (g_dir - p.dir * p.dir.dot(g_dir)) / p.vlen;
      }
    }

    if (g_pos) {
      for (int k = 0; k < 3; ++k) g_pos[i * 3 + k] += gmu[k];
    }
  }
}

}  // namespace

RenderOutputs render(const PrimitiveTensors& prims, const Camera& camera,
                     const RenderOptions& opts, RenderStats* stats) {
  camera.intrinsics.validate();
  const int w = camera.intrinsics.width, h = camera.intrinsics.height;
  auto ctx = std::make_shared<RenderContext>();
  ctx->camera = camera;
  ctx->opts = opts;
  ctx->width = w;
  ctx->height = h;

  std::vector<double> bundle(static_cast<size_t>(w * h) * 5, 0.0);
  if (prims.count() > 0) {
    prepare_gaussians(prims, *ctx, stats);
    composite_forward(*ctx, bundle);
  } else {
    for (int i = 0; i < w * h; ++i) {
      bundle[static_cast<size_t>(i) * 5 + 0] = opts.background[0];
      bundle[static_cast<size_t>(i) * 5 + 1] = opts.background[1];
      bundle[static_cast<size_t>(i) * 5 + 2] = opts.background[2];
    }
  }

  ad::Tensor bundle_t;
  if (prims.count() > 0) {
    auto pos_n = prims.positions.node();
    auto quat_n = prims.rotations.node();
    auto scl_n = prims.scales.node();
    auto opa_n = prims.opacities.node();
    auto col_n = prims.colors.node();
    PrimitiveTensors captured = prims;
    bundle_t = ad::make_op(
        {static_cast<int64_t>(w) * h, 5}, std::move(bundle),
        {prims.positions, prims.rotations, prims.scales, prims.opacities, prims.colors},
        [ctx, captured, pos_n, quat_n, scl_n, opa_n, col_n](ad::Node& self) {
          std::vector<GaussGrads> grads(ctx->prepared.size());
          composite_backward(*ctx, self.grad, grads);
          std::vector<double> gp, gq, gs, go, gc;
          const int64_t n = captured.count();
          auto buf = [n](std::vector<double>& v, const ad::NodePtr& node, int64_t width) {
            if (!node->requires_grad) return static_cast<double*>(nullptr);
            v.assign(static_cast<size_t>(n * width), 0.0);
            return v.data();
          };
          double* dgp = buf(gp, pos_n, 3);
          double* dgq = buf(gq, quat_n, 4);
          double* dgs = buf(gs, scl_n, 3);
          double* dgo = buf(go, opa_n, 1);
          double* dgc = buf(gc, col_n, static_cast<int64_t>(ctx->color_width));
          project_backward(*ctx, captured, grads, dgp, dgq, dgs, dgo, dgc);
          if (dgp) pos_n->accumulate(dgp, n * 3);
          if (dgq) quat_n->accumulate(dgq, n * 4);
          if (dgs) scl_n->accumulate(dgs, n * 3);
          if (dgo) opa_n->accumulate(dgo, n);
          if (dgc) col_n->accumulate(dgc, n * ctx->color_width);
        });
  } else {
    bundle_t = ad::Tensor({static_cast<int64_t>(w) * h, 5}, std::move(bundle));
  }

  RenderOutputs out;
  out.color = ad::slice_cols(bundle_t, 0, 3);
  out.depth_raw = ad::slice_cols(bundle_t, 3, 4);
  out.alpha = ad::slice_cols(bundle_t, 4, 5);
  out.depth_norm = ad::div(out.depth_raw, ad::add_scalar(out.alpha, opts.eps_norm));
  return out;
}

RenderedFrame RenderOutputs::to_frame(const Intrinsics& K) const {
  RenderedFrame f;
  f.width = K.width;
  f.height = K.height;
  f.color = color.values();
  f.depth_raw = depth_raw.values();
  f.depth_norm = depth_norm.values();
  f.alpha = alpha.values();
  return f;
}

RenderedFrame render_bruteforce(const std::vector<GaussianPrimitive>& prims,
                                const Camera& camera, const RenderOptions& opts) {
  camera.intrinsics.validate();
  const Intrinsics& K = camera.intrinsics;
  const int w = K.width, h = K.height;
  RenderedFrame f;
  f.width = w;
  f.height = h;
  f.color.assign(static_cast<size_t>(w * h) * 3, 0.0);
  f.depth_raw.assign(static_cast<size_t>(w * h), 0.0);
  f.depth_norm.assign(static_cast<size_t>(w * h), 0.0);
  f.alpha.assign(static_cast<size_t>(w * h), 0.0);

  struct Flat {
    Eigen::Vector2d center;
    double depth;
    Eigen::Matrix2d cov2d;
    double opacity;
    Eigen::Vector3d rgb;
  };
  std::vector<Flat> flats;
  const Eigen::Vector3d cam_center = camera.pose.center();
  for (const GaussianPrimitive& g : prims) {
    const Eigen::Vector3d p_cam = world_to_camera(camera.pose, g.position);
    const Projection proj = project_pinhole(K, p_cam);
    if (proj.clipped) continue;
    const Eigen::Matrix3d sigma = build_covariance(g.rotation, g.scale);
    const Eigen::Matrix<double, 2, 3> J = projection_jacobian(K, p_cam);
    Flat fl;
    fl.center = Eigen::Vector2d(proj.u, proj.v);
    fl.depth = proj.depth;
    fl.cov2d = project_covariance(sigma, camera.pose, J, opts.lambda_lp);
    fl.opacity = g.opacity;
    Eigen::Vector3d dir(0, 0, 1);
    if (opts.sh_degree >= 1) {
      const Eigen::Vector3d v = g.position - cam_center;
      if (v.norm() > 1e-12) dir = v.normalized();
    }
    fl.rgb = evaluate_sh(g.color, dir);
    flats.push_back(fl);
  }
  std::stable_sort(flats.begin(), flats.end(),
                   [](const Flat& a, const Flat& b) { return a.depth < b.depth; });

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector2d pix(x + 0.5, y + 0.5);
      double T = 1.0;
      double cr = 0, cg = 0, cb = 0, dsum = 0, asum = 0;
      for (const Flat& fl : flats) {
        const double wgt = gaussian_weight(fl.cov2d, pix - fl.center);
        const double alpha = std::min(fl.opacity * wgt, opts.alpha_clamp);
        if (alpha < kMinAlpha) continue;
        cr += fl.rgb[0] * alpha * T;
        cg += fl.rgb[1] * alpha * T;
        cb += fl.rgb[2] * alpha * T;
        dsum += fl.depth * alpha * T;
        asum += alpha * T;
        T *= (1.0 - alpha);
      }
      const size_t pixi = static_cast<size_t>(y * w + x);
      f.color[pixi * 3 + 0] = cr + opts.background[0] * T;
      f.color[pixi * 3 + 1] = cg + opts.background[1] * T;
      f.color[pixi * 3 + 2] = cb + opts.background[2] * T;
      f.depth_raw[pixi] = dsum;
      f.alpha[pixi] = asum;
      f.depth_norm[pixi] = dsum / (asum + opts.eps_norm);
    }
  }
  return f;
}

PrimitiveTensors to_tensors(const std::vector<GaussianPrimitive>& prims, int sh_degree) {
  const int64_t n = static_cast<int64_t>(prims.size());
  const int64_t cw = 3 * (sh_degree + 1) * (sh_degree + 1);
  std::vector<double> pos(static_cast<size_t>(n * 3)), quat(static_cast<size_t>(n * 4)),
      scl(static_cast<size_t>(n * 3)), opa(static_cast<size_t>(n)),
      col(static_cast<size_t>(n * cw), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const GaussianPrimitive& g = prims[static_cast<size_t>(i)];
    for (int k = 0; k < 3; ++k) pos[static_cast<size_t>(i * 3 + k)] = g.position[k];
    quat[static_cast<size_t>(i * 4 + 0)] = g.rotation.w;
    quat[static_cast<size_t>(i * 4 + 1)] = g.rotation.x;
    quat[static_cast<size_t>(i * 4 + 2)] = g.rotation.y;
    quat[static_cast<size_t>(i * 4 + 3)] = g.rotation.z;
    for (int k = 0; k < 3; ++k) scl[static_cast<size_t>(i * 3 + k)] = g.scale[k];
    opa[static_cast<size_t>(i)] = g.opacity;
    for (int64_t k = 0; k < cw && k < static_cast<int64_t>(g.color.size()); ++k)
      col[static_cast<size_t>(i * cw + k)] = g.color[static_cast<size_t>(k)];
  }
  PrimitiveTensors t;
  t.positions = ad::Tensor({n, 3}, std::move(pos));
  t.rotations = ad::Tensor({n, 4}, std::move(quat));
  t.scales = ad::Tensor({n, 3}, std::move(scl));
  t.opacities = ad::Tensor({n}, std::move(opa));
  t.colors = ad::Tensor({n, cw}, std::move(col));
  return t;
}

}  // namespace voxsplat
