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

#include <Eigen/Dense>

namespace voxsplat {

/// Camera-space points with z below this are culled from rendering paths.
inline constexpr double kNearPlane = 0.05;

/// Rotation as (w, x, y, z). Consumers normalize before use.
struct Quaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  Quaternion normalized() const;
};

/// Rigid transform mapping world coordinates to camera coordinates.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  Pose inverse() const;
  /// Camera center in world coordinates, -R^T t.
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
};

struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
};

struct Camera {
  Intrinsics intrinsics;
  Pose pose;  // world -> camera
};

/// Rotation matrix of the normalized quaternion. Throws on a near-zero norm.
Eigen::Matrix3d quat_to_rotmat(const Quaternion& q);

Eigen::Vector3d world_to_camera(const Pose& pose, const Eigen::Vector3d& p);

struct Projection {
  double u = 0, v = 0;    // pixels
  double depth = 0;       // camera-space z, meters
  bool clipped = false;   // z <= near plane
};

Projection project_pinhole(const Intrinsics& K, const Eigen::Vector3d& p_cam);

/// Inverse of project_pinhole for a given depth.
Eigen::Vector3d unproject_pinhole(const Intrinsics& K, double u, double v, double depth);

/// 2x3 Jacobian of (u, v) w.r.t. the camera-space point. Throws when
/// z <= near plane.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Intrinsics& K,
                                                const Eigen::Vector3d& p_cam);

/// Composition mapping frame-t camera coordinates to frame-t' camera
/// coordinates.
Pose relative_pose(const Pose& pose_t, const Pose& pose_tp);

}  // namespace voxsplat
