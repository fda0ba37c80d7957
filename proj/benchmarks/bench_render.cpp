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

#include <benchmark/benchmark.h>

#include <random>

#include "voxsplat/motion.hpp"
#include "voxsplat/ops.hpp"
#include "voxsplat/rasterizer.hpp"
#include "voxsplat/trainer.hpp"

namespace {

using namespace voxsplat;

std::vector<GaussianPrimitive> random_primitives(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<GaussianPrimitive> prims(static_cast<size_t>(n));
  for (auto& p : prims) {
    p.position = Eigen::Vector3d(4 * u(rng) - 2, 4 * u(rng) - 2, 2 * u(rng));
    p.rotation = Quaternion{0.5 + u(rng), u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5}.normalized();
    p.scale = Eigen::Vector3d(0.05 + 0.2 * u(rng), 0.05 + 0.2 * u(rng), 0.05 + 0.2 * u(rng));
    p.opacity = 0.2 + 0.7 * u(rng);
    p.color = {u(rng), u(rng), u(rng)};
  }
  return prims;
}

Camera bench_camera(int size) {
  Camera cam;
  cam.intrinsics = {static_cast<double>(size), static_cast<double>(size), size / 2.0, size / 2.0,
                    size, size};
  cam.pose.rotation = Eigen::Matrix3d::Identity();
  cam.pose.translation = Eigen::Vector3d(0, 0, 5);
  return cam;
}

void BM_RenderForward(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const auto prims = random_primitives(static_cast<int>(state.range(0)), rng);
  const PrimitiveTensors tensors = to_tensors(prims, 0);
  const Camera cam = bench_camera(128);
  RenderOptions opts;
  for (auto _ : state) {
    benchmark::DoNotOptimize(render(tensors, cam, opts).color.data());
  }
}
BENCHMARK(BM_RenderForward)->Arg(512)->Arg(2048)->Arg(8192);

void BM_RenderBackward(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const auto plain = random_primitives(static_cast<int>(state.range(0)), rng);
  PrimitiveTensors prims = to_tensors(plain, 0);
  prims.positions = ad::Tensor(prims.positions.shape(), prims.positions.values(), true);
  prims.opacities = ad::Tensor(prims.opacities.shape(), prims.opacities.values(), true);
  const Camera cam = bench_camera(128);
  RenderOptions opts;
  for (auto _ : state) {
    prims.positions.zero_grad();
    prims.opacities.zero_grad();
    ad::Tape tape;
    const ad::Tensor loss = ad::mean(render(prims, cam, opts).color);
    tape.backward(loss);
    benchmark::DoNotOptimize(prims.positions.grad());
  }
}
BENCHMARK(BM_RenderBackward)->Arg(512)->Arg(2048)->Arg(8192);

void BM_WarpVoxels(benchmark::State& state) {
  std::mt19937_64 rng(3);
  GridMeta meta;
  VoxelGrid grid = VoxelGrid::create(meta, 16, rng);
  const ad::Tensor vel = ad::Tensor::randn({meta.dims[0], meta.dims[1], meta.dims[2], 3}, rng, 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(warp_voxels(grid, vel, 0.5).features.data());
  }
}
BENCHMARK(BM_WarpVoxels);

}  // namespace

BENCHMARK_MAIN();
