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

#include "voxsplat/geometry.hpp"

#include <stdexcept>

namespace voxsplat {

Quaternion Quaternion::normalized() const {
  const double n = norm();
  if (n <= 1e-12) {
    throw std::invalid_argument("Quaternion::normalized: near-zero norm");
  }
  return {w / n, x / n, y / n, z / n};
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.transpose();
  out.translation = -out.rotation * translation;
  return out;
}

void Intrinsics::validate() const {
  if (fx <= 0 || fy <= 0) {
    throw std::invalid_argument("Intrinsics: focal lengths must be positive");
  }
  if (cx <= 0 || cx >= width || cy <= 0 || cy >= height) {
    throw std::invalid_argument("Intrinsics: principal point outside image");
  }
}

Eigen::Matrix3d quat_to_rotmat(const Quaternion& q_in) {
  const Quaternion q = q_in.normalized();
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Eigen::Matrix3d R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

Eigen::Vector3d world_to_camera(const Pose& pose, const Eigen::Vector3d& p) {
  return pose.rotation * p + pose.translation;
}

Projection project_pinhole(const Intrinsics& K, const Eigen::Vector3d& p_cam) {
  Projection out;
  out.depth = p_cam.z();
  if (p_cam.z() <= kNearPlane) {
    out.clipped = true;
    return out;
  }
  out.u = K.fx * p_cam.x() / p_cam.z() + K.cx;
  out.v = K.fy * p_cam.y() / p_cam.z() + K.cy;
  return out;
}

Eigen::Vector3d unproject_pinhole(const Intrinsics& K, double u, double v, double depth) {
  return {(u - K.cx) / K.fx * depth, (v - K.cy) / K.fy * depth, depth};
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Intrinsics& K,
                                                const Eigen::Vector3d& p_cam) {
  const double z = p_cam.z();
  if (z <= kNearPlane) {
    throw std::invalid_argument("projection_jacobian: point behind near plane");
  }
  Eigen::Matrix<double, 2, 3> J;
  J << K.fx / z, 0, -K.fx * p_cam.x() / (z * z),
      0, K.fy / z, -K.fy * p_cam.y() / (z * z);
  return J;
}

Pose relative_pose(const Pose& pose_t, const Pose& pose_tp) {
  // p_t' = R' p_w + t',  p_w = R^T (p_t - t)
  Pose out;
  out.rotation = pose_tp.rotation * pose_t.rotation.transpose();
  out.translation = pose_tp.translation - out.rotation * pose_t.translation;
  return out;
}

}  // namespace voxsplat
