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

#include "voxsplat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "voxsplat/motion.hpp"
#include "voxsplat/ops.hpp"
#include "voxsplat/photometric.hpp"
#include "voxsplat/trainer.hpp"

namespace voxsplat::ad {

double finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double h) {
  for (Tensor& p : params) p.zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f();
    tape.backward(loss);
    for (Tensor& p : params) {
      analytic.emplace_back(p.grad(), p.grad() + p.numel());
    }
  }
  double max_err = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double orig = p.data()[i];
      p.mutable_data()[i] = orig + h;
      const double fp = f().item();
      p.mutable_data()[i] = orig - h;
      const double fm = f().item();
      p.mutable_data()[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi][static_cast<size_t>(i)];
      // Denominator floor 1e-6: central differences carry roundoff noise of
      // about eps*|f|/h ~ 1e-11, so entries below the floor are held to an
      // absolute tolerance (threshold * 1e-6) instead of a relative one.
      const double err = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      max_err = std::max(max_err, err);
    }
  }
  for (Tensor& p : params) p.zero_grad();
  return max_err;
}

}  // namespace voxsplat::ad

namespace voxsplat {

namespace {

using ad::Tensor;

/// Uniform values in +-[lo, hi]; keeps |x| >= lo so kinked ops stay smooth
/// within the finite-difference stencil.
Tensor uaway(std::vector<int64_t> shape, std::mt19937_64& rng, double lo = 0.2, double hi = 1.0) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::uniform_real_distribution<double> mag(lo, hi);
  std::uniform_int_distribution<int> sign(0, 1);
  std::vector<double> data(static_cast<size_t>(n));
  for (double& v : data) v = (sign(rng) ? 1.0 : -1.0) * mag(rng);
  return Tensor(std::move(shape), std::move(data), true);
}

Tensor upos(std::vector<int64_t> shape, std::mt19937_64& rng, double lo, double hi) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::uniform_real_distribution<double> mag(lo, hi);
  std::vector<double> data(static_cast<size_t>(n));
  for (double& v : data) v = mag(rng);
  return Tensor(std::move(shape), std::move(data), true);
}

SceneSpec tiny_scene_spec() {
  SceneSpec spec;
  spec.image_width = 8;
  spec.image_height = 8;
  spec.rig_count = 1;
  spec.rig_radius = 3.0;
  spec.rig_height = 2.5;
  spec.rig_velocity = Eigen::Vector3d(0.05, 0.02, 0.0);
  spec.frame_count = 3;
  spec.dt = 0.5;
  spec.grid.dims[0] = 3;
  spec.grid.dims[1] = 3;
  spec.grid.dims[2] = 2;
  spec.grid.origin = Eigen::Vector3d(-1.2, -1.2, 0);
  spec.grid.voxel_size = Eigen::Vector3d(0.8, 0.8, 0.8);
  SceneObject obj;
  obj.kind = SceneObject::Kind::Sphere;
  obj.center = Eigen::Vector3d(0, 0, 0.6);
  obj.half_extent = Eigen::Vector3d(0.5, 0.5, 0.5);
  obj.velocity = Eigen::Vector3d(0.2, 0, 0);
  spec.objects.push_back(obj);
  return spec;
}

}  // namespace

std::vector<GradCheckEntry> gradcheck_suite(uint64_t seed, double threshold) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckEntry> out;
  auto check = [&](const std::string& name, const std::function<Tensor()>& f,
                   std::vector<Tensor> params) {
    GradCheckEntry e;
    e.name = name;
    e.max_rel_err = ad::finite_diff_check(f, std::move(params));
    e.pass = e.max_rel_err < threshold;
    out.push_back(e);
  };

  {
    Tensor a = uaway({3, 4}, rng), b = uaway({3, 4}, rng);
    check("add", [=] { return ad::sum(ad::add(a, b)); }, {a, b});
    check("sub", [=] { return ad::mean(ad::sub(a, b)); }, {a, b});
    check("mul", [=] { return ad::sum(ad::mul(a, b)); }, {a, b});
  }
  {
    Tensor a = uaway({3, 4}, rng);
    Tensor b = upos({3, 4}, rng, 0.5, 1.5);
    check("div", [=] { return ad::sum(ad::div(a, b)); }, {a, b});
  }
  {
    // Separated magnitudes keep min() away from ties.
    Tensor a = upos({3, 4}, rng, 0.1, 0.4), b = upos({3, 4}, rng, 0.6, 1.0);
    check("minimum", [=] { return ad::sum(ad::minimum(a, b)); }, {a, b});
  }
  {
    Tensor a = uaway({3, 4}, rng), v = uaway({4}, rng), s = uaway({3}, rng);
    check("add_rowvec", [=] { return ad::sum(ad::add_rowvec(a, v)); }, {a, v});
    check("mul_rowvec", [=] { return ad::sum(ad::mul_rowvec(a, v)); }, {a, v});
    check("mul_col", [=] { return ad::sum(ad::mul_col(a, s)); }, {a, s});
    check("scale", [=] { return ad::sum(ad::scale(a, -1.7)); }, {a});
    check("add_scalar", [=] { return ad::sum(ad::add_scalar(a, 0.3)); }, {a});
  }
  {
    Tensor a = uaway({3, 4}, rng), b = uaway({4, 2}, rng);
    check("matmul", [=] { return ad::sum(ad::matmul(a, b)); }, {a, b});
  }
  {
    Tensor a = uaway({3, 4}, rng);
    check("exp", [=] { return ad::sum(ad::exp(a)); }, {a});
    check("tanh", [=] { return ad::sum(ad::tanh(a)); }, {a});
    check("softplus", [=] { return ad::sum(ad::softplus(a)); }, {a});
    check("sigmoid", [=] { return ad::sum(ad::sigmoid(a)); }, {a});
    check("relu", [=] { return ad::sum(ad::relu(a)); }, {a});
    check("abs", [=] { return ad::sum(ad::abs(a)); }, {a});
    check("clamp", [=] { return ad::sum(ad::clamp(a, -0.1, 0.9)); }, {a});
    check("mean", [=] { return ad::mean(a); }, {a});
    check("reshape", [=] { return ad::sum(ad::mul(ad::reshape(a, {2, 6}), ad::reshape(a, {2, 6}))); },
          {a});
    check("slice_cols", [=] { return ad::sum(ad::slice_cols(a, 1, 3)); }, {a});
    check("index_rows", [=] { return ad::sum(ad::index_rows(a, {2, 0, 1, 1})); }, {a});
  }
  {
    Tensor a = uaway({3, 2}, rng), b = uaway({3, 3}, rng);
    check("concat_cols", [=] { return ad::sum(ad::mul(ad::concat_cols({a, b}),
                                                      ad::concat_cols({a, b}))); },
          {a, b});
  }
  {
    Tensor q = uaway({4, 4}, rng, 0.4, 1.0);
    check("rownormalize", [=] { return ad::sum(ad::rownormalize(q, {1, 0, 0, 0})); }, {q});
  }
  {
    // stop_gradient: analytic grad must vanish identically, which finite
    // differences cannot certify; asserted directly.
    // d/da sum(sg(a) * a) must equal sg(a)'s value: the blocked branch
    // contributes nothing.
    Tensor a = uaway({3, 3}, rng);
    a.zero_grad();
    {
      ad::Tape tape;
      tape.backward(ad::sum(ad::mul(ad::stop_gradient(a), a)));
    }
    GradCheckEntry e;
    e.name = "stop_gradient";
    for (int64_t i = 0; i < a.numel(); ++i) {
      e.max_rel_err = std::max(e.max_rel_err, std::fabs(a.grad()[i] - a.data()[i]));
    }
    e.pass = e.max_rel_err == 0.0;
    out.push_back(e);
  }
  {
    Tensor img = upos({4, 5, 3}, rng, 0.0, 1.0);
    check("box_filter3", [=] { return ad::sum(ad::mul(ad::box_filter3(img), img)); }, {img});
    // Sample points sit on fixed fractional offsets, clear of the bilinear
    // cell boundaries at half-integer coordinates.
    std::vector<double> uv;
    std::uniform_int_distribution<int> ix(1, 3), iy(1, 2);
    for (int i = 0; i < 6; ++i) {
      uv.push_back(ix(rng) + 0.23);
      uv.push_back(iy(rng) + 0.71);
    }
    Tensor uvt({6, 2}, std::move(uv), true);
    check("bilinear_sample", [=] { return ad::sum(ad::bilinear_sample(img, uvt)); }, {img, uvt});
  }
  {
    Tensor vol = upos({3, 4, 3, 2}, rng, 0.0, 1.0);
    std::vector<double> c;
    std::uniform_int_distribution<int> ii(0, 1);
    for (int i = 0; i < 5; ++i) {
      c.push_back(ii(rng) + 0.31);
      c.push_back(ii(rng) + 0.62);
      c.push_back(ii(rng) + 0.27);
    }
    Tensor ct({5, 3}, std::move(c), true);
    check("trilinear_sample", [=] { return ad::sum(ad::trilinear_sample(vol, ct)); }, {vol, ct});
  }
  {
    Tensor in = uaway({3, 3, 2, 2}, rng), w = uaway({2, 2, 3, 3, 3}, rng, 0.1, 0.5),
           b = uaway({2}, rng);
    check("conv3d", [=] { return ad::sum(ad::mul(ad::conv3d(in, w, b), ad::conv3d(in, w, b))); },
          {in, w, b});
  }
  {
    Tensor x = uaway({6, 3}, rng), gamma = upos({3}, rng, 0.5, 1.5), beta = uaway({3}, rng);
    Tensor probe = uaway({6, 3}, rng);
    check("volume_norm",
          [=] {
            std::vector<double> rm(3, 0.0), rv(3, 1.0);
            return ad::sum(
                ad::mul(ad::volume_norm(x, gamma, beta, 1e-5, true, &rm, &rv), probe));
          },
          {x, gamma, beta});
  }
  {
    // Differentiable render: SH degree 1 scene, L1 + depth + alpha scalar.
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int n = 5;
    std::vector<double> pos, rot, scl, opa, col;
    for (int i = 0; i < n; ++i) {
      pos.insert(pos.end(), {u01(rng) - 0.5, u01(rng) - 0.5, 0.3 * u01(rng)});
      rot.insert(rot.end(), {0.5 + u01(rng), u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5});
      scl.insert(scl.end(), {0.2 + 0.2 * u01(rng), 0.2 + 0.2 * u01(rng), 0.2 + 0.2 * u01(rng)});
      opa.push_back(0.3 + 0.4 * u01(rng));
      for (int k = 0; k < 12; ++k) col.push_back(k < 3 ? u01(rng) : 0.3 * (u01(rng) - 0.5));
    }
    PrimitiveTensors prims;
    prims.positions = Tensor({n, 3}, pos, true);
    prims.rotations = Tensor({n, 4}, rot, true);
    prims.scales = Tensor({n, 3}, scl, true);
    prims.opacities = Tensor({n}, opa, true);
    prims.colors = Tensor({n, 12}, col, true);
    Camera cam;
    cam.intrinsics = {10.0, 10.0, 6.0, 6.0, 12, 12};
    cam.pose.rotation = Eigen::Matrix3d::Identity();
    cam.pose.translation = Eigen::Vector3d(0, 0, 2.5);
    RenderOptions opts = RenderOptions::exact();
    opts.sh_degree = 1;
    std::vector<double> tgt(12 * 12 * 3);
    for (double& v : tgt) v = u01(rng);
    const Tensor target({12 * 12, 3}, std::move(tgt));
    check("render_loss",
          [=] {
            const RenderOutputs r = render(prims, cam, opts);
            return ad::add(ad::mean(ad::abs(ad::sub(r.color, target))),
                           ad::add(ad::scale(ad::mean(r.depth_norm), 0.1),
                                   ad::scale(ad::mean(r.alpha), 0.1)));
          },
          {prims.positions, prims.rotations, prims.scales, prims.opacities, prims.colors});
  }
  {
    // Full three-loss training graph on a miniature scene.
    const SceneSequence seq = generate_scene(tiny_scene_spec());
    TrainConfig cfg;
    cfg.channels = 3;
    cfg.hidden = 4;
    cfg.vel_hidden = 4;
    cfg.gaussians_per_anchor = 1;
    cfg.render = RenderOptions::exact();
    std::mt19937_64 mrng(seed + 1);
    Model model = create_model(seq.grid, cfg, mrng);
    // A generic parameter point keeps gradient entries healthy. The
    // fresh-init point has structural
    // first-order nulls that finite differences cannot confirm: identity-ish
    // quaternions make their own w slot a null direction, near-isotropic
    // scales make rotations irrelevant, and a zeroed velocity head silences
    // L_vel entirely.
    auto jitter = [&](const NamedParams& ps, double stddev) {
      std::normal_distribution<double> nd(0.0, stddev);
      for (auto& [name, t] : ps) {
        for (int64_t i = 0; i < t.numel(); ++i) {
          const_cast<Tensor&>(t).mutable_data()[i] += nd(mrng);
        }
      }
    };
    // A degenerate draw can push every opacity below the filter threshold,
    // leaving an empty scene whose losses are constants with no tape; redraw
    // the scene parameters until at least one gaussian survives.
    for (int attempt = 0;; ++attempt) {
      jitter({{"grid", model.grid.features}}, 0.35);
      jitter(model.mlp.parameters(), 0.35);
      if (filter_gaussians(decode_primitives(model.grid, model.mlp)).count() > 0) break;
      if (attempt >= 64) {
        throw std::runtime_error("gradcheck_suite: could not draw a non-empty scene");
      }
      model = create_model(seq.grid, cfg, mrng);
    }
    // Moderate head jitter: velocities stay a fraction of a voxel so the
    // warp keeps every cell in bounds.
    jitter(model.head.parameters(), 0.25);
    const SceneFrame& cur = seq.frames[1];
    const SceneFrame* prev = &seq.frames[0];
    const SceneFrame* next = &seq.frames[2];
    auto eq8 = [&, prev, next](bool with_vel) {
      std::vector<Tensor> rendered;
      const PrimitiveTensors prims = filter_gaussians(decode_primitives(model.grid, model.mlp));
      for (const Camera& c : cur.cameras) rendered.push_back(render(prims, c, cfg.render).color);
      const Tensor l_img = l1_image_loss(rendered, cur.images);
      Tensor l_vel;
      if (with_vel) {
        const Tensor vel = predict_velocity(model.grid, model.head, true);
        l_vel = ad::scale(
            ad::add(velocity_loss(model.grid, vel, model.mlp, prev->cameras, prev->images,
                                  prev->timestamp - cur.timestamp, cfg.render),
                    velocity_loss(model.grid, vel, model.mlp, next->cameras, next->images,
                                  next->timestamp - cur.timestamp, cfg.render)),
            0.5);
      }
      const Tensor l_pc =
          pc_loss_full(model.grid, model.mlp, cur, {prev, next}, cfg.render, 0.85, false);
      return total_loss(l_img, l_vel, l_pc, 0.5, 1.0, 1.0);
    };
    // L_vel's stop-gradient zeroes the analytic grid/MLP gradient on purpose
    // while its forward value still moves under finite differences, so those
    // parameters are audited against the two live losses only.
    std::vector<Tensor> scene_params, head_params;
    scene_params.push_back(model.grid.features);
    for (auto& [name, t] : model.mlp.parameters()) scene_params.push_back(t);
    for (auto& [name, t] : model.head.parameters()) head_params.push_back(t);
    check("pipeline_eq8_scene", [&] { return eq8(false); }, scene_params);
    check("pipeline_eq8_velhead", [&] { return eq8(true); }, head_params);
  }
  return out;
}

}  // namespace voxsplat
