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

#include <doctest.h>

#include <algorithm>
#include <random>

#include "voxsplat/gradcheck.hpp"
#include "voxsplat/ops.hpp"
#include "voxsplat/rasterizer.hpp"

using namespace voxsplat;

namespace {

// cx/cy offset by half a pixel so the optical axis hits the center of pixel
// (w/2, h/2) exactly (pixel centers sit at x + 0.5).
Camera test_camera(int w = 64, int h = 64) {
  Camera cam;
  cam.intrinsics = {double(w), double(h), w / 2.0 + 0.5, h / 2.0 + 0.5, w, h};
  cam.pose = Pose::identity();  // looking down +z
  return cam;
}

std::vector<GaussianPrimitive> random_prims(std::mt19937_64& rng, int count, int sh_degree) {
  std::uniform_real_distribution<double> ux(-1.2, 1.2), uz(2.0, 8.0), us(0.05, 0.5),
      uo(0.05, 0.95), uc(0.0, 1.0);
  std::normal_distribution<double> nd;
  std::vector<GaussianPrimitive> prims;
  for (int i = 0; i < count; ++i) {
    GaussianPrimitive g;
    g.position = {ux(rng), ux(rng), uz(rng)};
    Quaternion q{nd(rng), nd(rng), nd(rng), nd(rng)};
    g.rotation = q.normalized();
    g.scale = {us(rng), us(rng), us(rng)};
    g.opacity = uo(rng);
    g.color.assign(static_cast<size_t>(3 * (sh_degree + 1) * (sh_degree + 1)), 0.0);
    for (auto& c : g.color) c = uc(rng);
    prims.push_back(g);
  }
  return prims;
}

double frame_max_diff(const RenderedFrame& a, const RenderedFrame& b) {
  double m = 0;
  for (size_t i = 0; i < a.color.size(); ++i) m = std::max(m, std::fabs(a.color[i] - b.color[i]));
  for (size_t i = 0; i < a.depth_raw.size(); ++i) {
    m = std::max(m, std::fabs(a.depth_raw[i] - b.depth_raw[i]));
    m = std::max(m, std::fabs(a.depth_norm[i] - b.depth_norm[i]));
    m = std::max(m, std::fabs(a.alpha[i] - b.alpha[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("single centered gaussian blends per the one-term formula") {
  Camera cam = test_camera();
  GaussianPrimitive g;
  g.position = {0, 0, 2};  // projects to the center pixel at uv = (32, 32)
  g.scale = {0.2, 0.2, 0.2};
  g.opacity = 0.8;
  g.color = {1, 0, 0};
  RenderOptions opts = RenderOptions::exact();
  RenderedFrame f = render(to_tensors({g}, 0), cam, opts).to_frame(cam.intrinsics);

  // Pixel (32,32) center is exactly the projection point: weight = 1.
  CHECK(f.at_color(32, 32, 0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(f.at_color(32, 32, 1) == doctest::Approx(0.0));
  CHECK(f.depth_raw[32 * 64 + 32] == doctest::Approx(1.6).epsilon(1e-9));
  CHECK(f.depth_norm[32 * 64 + 32] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(f.alpha[32 * 64 + 32] == doctest::Approx(0.8).epsilon(1e-12));

  RenderedFrame bf = render_bruteforce({g}, cam, opts);
  CHECK(frame_max_diff(f, bf) < 1e-12);
}

TEST_CASE("two coincident gaussians composite transmittance") {
  Camera cam = test_camera();
  GaussianPrimitive a, b;
  a.position = b.position = {0, 0, 2};
  a.scale = b.scale = {0.3, 0.3, 0.3};
  a.opacity = 0.6;
  b.opacity = 0.5;
  b.position.z() = 3;  // behind a
  a.color = {1, 1, 1};
  b.color = {1, 1, 1};
  RenderedFrame f = render_bruteforce({a, b}, cam, RenderOptions::exact());
  CHECK(f.alpha[32 * 64 + 32] == doctest::Approx(0.6 + 0.5 * (1 - 0.6)).epsilon(1e-9));
}

TEST_CASE("permutation invariance and occlusion in the oracle") {
  std::mt19937_64 rng(61);
  auto prims = random_prims(rng, 30, 0);
  Camera cam = test_camera();
  RenderOptions opts = RenderOptions::exact();
  RenderedFrame f1 = render_bruteforce(prims, cam, opts);
  std::shuffle(prims.begin(), prims.end(), rng);
  RenderedFrame f2 = render_bruteforce(prims, cam, opts);
  CHECK(frame_max_diff(f1, f2) < 1e-12);

  GaussianPrimitive near, far;
  near.position = {0, 0, 2};
  far.position = {0, 0, 5};
  near.scale = far.scale = {0.5, 0.5, 0.5};
  near.opacity = 1.0;  // clamped to 0.999 internally
  far.opacity = 0.9;
  near.color = {0, 1, 0};
  far.color = {1, 0, 0};
  RenderedFrame f = render_bruteforce({near, far}, cam, opts);
  CHECK(f.at_color(32, 32, 0) < 2e-3);  // far red is hidden behind T <= 1e-3
  CHECK(f.at_color(32, 32, 1) == doctest::Approx(0.999).epsilon(1e-9));
}

TEST_CASE("zero primitives and zero opacities give background") {
  Camera cam = test_camera();
  RenderOptions opts = RenderOptions::exact();
  opts.background = {0.1, 0.2, 0.3};
  RenderedFrame f = render_bruteforce({}, cam, opts);
  CHECK(f.at_color(5, 9, 0) == doctest::Approx(0.1));
  CHECK(f.at_color(5, 9, 2) == doctest::Approx(0.3));
  CHECK(f.alpha[0] == 0.0);

  std::mt19937_64 rng(71);
  auto prims = random_prims(rng, 10, 0);
  for (auto& g : prims) g.opacity = 0.0;
  RenderedFrame z = render_bruteforce(prims, cam, opts);
  CHECK(z.at_color(32, 32, 1) == doctest::Approx(0.2));
  CHECK(z.depth_raw[32 * 64 + 32] == 0.0);
  CHECK(z.alpha[32 * 64 + 32] == 0.0);
}

TEST_CASE("tile renderer matches the brute-force oracle on 10 random scenes") {
  std::mt19937_64 rng(81);
  std::uniform_int_distribution<int> nprims(20, 200);
  Camera cam = test_camera();
  for (int s = 0; s < 10; ++s) {
    const int sh_degree = s % 2;
    auto prims = random_prims(rng, nprims(rng), sh_degree);
    RenderOptions opts = RenderOptions::exact();
    opts.sh_degree = sh_degree;
    RenderedFrame tiled = render(to_tensors(prims, sh_degree), cam, opts).to_frame(cam.intrinsics);
    RenderedFrame oracle = render_bruteforce(prims, cam, opts);
    INFO("scene ", s, " diff ", frame_max_diff(tiled, oracle));
    CHECK(frame_max_diff(tiled, oracle) < 1e-6);
  }
}

TEST_CASE("alpha accumulates in [0,1] and is monotone in opacity") {
  std::mt19937_64 rng(91);
  auto prims = random_prims(rng, 40, 0);
  Camera cam = test_camera();
  RenderOptions opts = RenderOptions::exact();
  RenderedFrame base = render_bruteforce(prims, cam, opts);
  for (double a : base.alpha) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
  // Raising one opacity never lowers accumulated alpha anywhere.
  prims[7].opacity = std::min(0.999, prims[7].opacity + 0.3);
  RenderedFrame bumped = render_bruteforce(prims, cam, opts);
  for (size_t i = 0; i < base.alpha.size(); ++i) CHECK(bumped.alpha[i] >= base.alpha[i] - 1e-12);
}

TEST_CASE("depth_raw vs depth_norm consistency") {
  std::mt19937_64 rng(101);
  auto prims = random_prims(rng, 50, 0);
  Camera cam = test_camera();
  RenderedFrame f = render_bruteforce(prims, cam, RenderOptions::exact());
  for (size_t i = 0; i < f.depth_raw.size(); ++i) {
    CHECK(f.depth_raw[i] <= f.depth_norm[i] * f.alpha[i] + 1e-6);
  }
}

TEST_CASE("position gradient points toward a displaced target blob") {
  // A red gaussian left of the image center, target image red at the center:
  // decreasing loss requires moving right, so d(loss)/d(pos_x) < 0.
  Camera cam = test_camera(32, 32);
  GaussianPrimitive g;
  g.position = {-0.15, 0, 2};
  g.scale = {0.15, 0.15, 0.15};
  g.opacity = 0.9;
  g.color = {1, 0, 0};
  PrimitiveTensors pt = to_tensors({g}, 0);
  pt.positions = ad::Tensor(pt.positions.shape(), pt.positions.values(), true);

  GaussianPrimitive tgt = g;
  tgt.position = {0, 0, 2};
  RenderOptions opts = RenderOptions::exact();
  RenderedFrame target = render_bruteforce({tgt}, cam, opts);
  ad::Tensor target_t({static_cast<int64_t>(target.color.size() / 3), 3}, target.color);

  {
    ad::Tape tape;
    RenderOutputs out = render(pt, cam, opts);
    ad::Tensor loss = ad::mean(ad::abs(ad::sub(out.color, target_t)));
    tape.backward(loss);
    CHECK(pt.positions.grad()[0] < 0.0);
  }

  // And the full graph agrees with finite differences.
  auto f = [&] {
    RenderOutputs o = render(pt, cam, opts);
    return ad::mean(ad::abs(ad::sub(o.color, target_t)));
  };
  CHECK(ad::finite_diff_check(f, {pt.positions}) < 1e-4);
}

TEST_CASE("opacity gradient sign for a bright gaussian on a dark target") {
  Camera cam = test_camera(32, 32);
  GaussianPrimitive g;
  g.position = {0, 0, 2};
  g.scale = {0.4, 0.4, 0.4};
  g.opacity = 0.5;
  g.color = {0.9, 0.9, 0.9};  // brighter than the all-zero target
  PrimitiveTensors pt = to_tensors({g}, 0);
  pt.opacities = ad::Tensor(pt.opacities.shape(), pt.opacities.values(), true);
  ad::Tensor target_t = ad::Tensor::full({32 * 32, 3}, 0.0);

  RenderOptions opts = RenderOptions::exact();
  {
    ad::Tape tape;
    RenderOutputs out = render(pt, cam, opts);
    ad::Tensor loss = ad::mean(ad::abs(ad::sub(out.color, target_t)));
    tape.backward(loss);
    // Against a black background, more bright opacity raises every covered
    // pixel above the dark target, so the loss grows with opacity.
    CHECK(pt.opacities.grad()[0] > 0.0);
  }

  auto f = [&] {
    RenderOutputs o = render(pt, cam, opts);
    return ad::mean(ad::abs(ad::sub(o.color, target_t)));
  };
  CHECK(ad::finite_diff_check(f, {pt.opacities}) < 1e-4);
}

TEST_CASE("occluded gaussian receives near-zero gradient") {
  Camera cam = test_camera(32, 32);
  GaussianPrimitive front, back;
  front.position = {0, 0, 2};
  back.position = {0, 0, 4};
  front.scale = back.scale = {0.6, 0.6, 0.6};
  front.opacity = 0.999;
  back.opacity = 0.9;
  front.color = {1, 1, 1};
  back.color = {0, 0, 0};
  PrimitiveTensors pt = to_tensors({front, back}, 0);
  pt.positions = ad::Tensor(pt.positions.shape(), pt.positions.values(), true);

  ad::Tape tape;
  RenderOutputs out = render(pt, cam, RenderOptions::exact());
  ad::Tensor loss = ad::mean(out.color);
  tape.backward(loss);
  const double front_mag = std::fabs(pt.positions.grad()[0]) + std::fabs(pt.positions.grad()[1]);
  const double back_mag = std::fabs(pt.positions.grad()[3]) + std::fabs(pt.positions.grad()[4]);
  CHECK(back_mag < 1e-2 * std::max(front_mag, 1e-12) + 1e-9);
}
