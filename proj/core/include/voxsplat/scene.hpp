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

#include <string>
#include <vector>

#include "voxsplat/config.hpp"
#include "voxsplat/geometry.hpp"
#include "voxsplat/image_io.hpp"

namespace voxsplat {

/// Metadata of the dense feature / ground-truth velocity grid: world-space
/// placement of an X*Y*Z lattice of cells.
struct GridMeta {
  int64_t dims[3] = {32, 32, 4};
  Eigen::Vector3d origin = Eigen::Vector3d(-4, -4, 0);  // min corner, meters
  Eigen::Vector3d voxel_size = Eigen::Vector3d(0.25, 0.25, 0.5);

  int64_t cell_count() const { return dims[0] * dims[1] * dims[2]; }
  Eigen::Vector3d cell_center(int64_t x, int64_t y, int64_t z) const {
    return origin + Eigen::Vector3d((x + 0.5) * voxel_size.x(), (y + 0.5) * voxel_size.y(),
                                    (z + 0.5) * voxel_size.z());
  }
  Eigen::Vector3d max_corner() const {
    return origin + Eigen::Vector3d(dims[0] * voxel_size.x(), dims[1] * voxel_size.y(),
                                    dims[2] * voxel_size.z());
  }
};

struct SceneObject {
  enum class Kind { Sphere, Box };
  Kind kind = Kind::Sphere;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();       // at t = 0
  Eigen::Vector3d half_extent = Eigen::Vector3d::Ones();  // radius in x for spheres
  Eigen::Vector3d albedo = Eigen::Vector3d(0.8, 0.3, 0.3);
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // m/s, world

  double radius() const { return half_extent.x(); }
  Eigen::Vector3d center_at(double t) const { return center + velocity * t; }
};

struct SceneSpec {
  // Checkerboard ground plane at z = 0.
  bool plane_enabled = true;
  double plane_cell = 1.0;
  Eigen::Vector3d plane_color_a = Eigen::Vector3d(0.85, 0.85, 0.85);
  Eigen::Vector3d plane_color_b = Eigen::Vector3d(0.25, 0.30, 0.40);

  std::vector<SceneObject> objects;

  // Camera ring: `rig_count` cameras evenly spaced, looking at `rig_target`.
  // The whole rig translates at rig_velocity (gives the temporal baseline
  // that makes cross-frame reprojection informative).
  int rig_count = 4;
  double rig_radius = 4.0;
  double rig_height = 3.0;
  Eigen::Vector3d rig_target = Eigen::Vector3d(0, 0, 0.5);
  Eigen::Vector3d rig_velocity = Eigen::Vector3d(0.4, 0.2, 0.0);

  int image_width = 128;
  int image_height = 128;
  double fov_deg = 60.0;

  int frame_count = 5;
  double dt = 0.5;
  uint64_t seed = 0;

  Eigen::Vector3d light_dir = Eigen::Vector3d(-0.4, -0.3, -1.0);  // incoming
  Eigen::Vector3d background = Eigen::Vector3d::Zero();

  GridMeta grid;

  void validate() const;
  static SceneSpec from_config(const KeyValueConfig& cfg);
};

/// Per-frame, per-camera data with analytic ground truth.
struct SceneFrame {
  double timestamp = 0;
  std::vector<Camera> cameras;
  std::vector<ImageF> images;
  std::vector<MapF> depths;          // camera-space z; 0 where no surface hit
  std::vector<double> gt_velocity;   // X*Y*Z*3, m/s, world
};

struct SceneSequence {
  Intrinsics intrinsics;  // shared by all cameras
  GridMeta grid;
  double dt = 0.5;
  std::vector<SceneFrame> frames;

  int camera_count() const { return frames.empty() ? 0 : static_cast<int>(frames[0].cameras.size()); }
};

/// Analytic ray-traced sequence (nearest hit over plane/spheres/boxes, flat
/// shading with one directional light). Deterministic for a given spec.
SceneSequence generate_scene(const SceneSpec& spec);

/// Writes PNG images, PFM depth maps, per-frame ground-truth velocity blobs
/// and a `manifest.txt` into `dir` (created if needed).
void save_scene(const SceneSequence& seq, const std::string& dir);

/// Loads what save_scene wrote. Poses in the manifest are camera-to-world;
/// the loader inverts them into the rendering-native direction.
SceneSequence load_scene(const std::string& dir);

}  // namespace voxsplat
