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

#include "voxsplat/gaussians.hpp"

#include <cmath>
#include <stdexcept>

namespace voxsplat {

Eigen::Matrix3d build_covariance(const Quaternion& q, const Eigen::Vector3d& s) {
  if (s.x() <= 0 || s.y() <= 0 || s.z() <= 0) {
    throw std::invalid_argument("build_covariance: scale must be positive");
  }
  const Eigen::Matrix3d R = quat_to_rotmat(q);
  const Eigen::Matrix3d A = R * s.asDiagonal();
  // Each entry is computed once and mirrored, so the result is bitwise symmetric.
  Eigen::Matrix3d sigma;
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      const double v = A.row(i).dot(A.row(j));
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  }
  return sigma;
}

Eigen::Matrix2d project_covariance(const Eigen::Matrix3d& sigma, const Pose& pose,
                                   const Eigen::Matrix<double, 2, 3>& J, double lambda_lp) {
  const Eigen::Matrix<double, 2, 3> M = J * pose.rotation;
  Eigen::Matrix2d out = M * sigma * M.transpose();
  out(0, 0) += lambda_lp;
  out(1, 1) += lambda_lp;
  return out;
}

double gaussian_weight(const Eigen::Matrix2d& cov2d, const Eigen::Vector2d& delta) {
  const double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
  if (det < 1e-12) return 0.0;
  // Adjugate inverse of the symmetric 2x2.
  const double a = cov2d(1, 1) / det;
  const double b = -cov2d(0, 1) / det;
  const double c = cov2d(0, 0) / det;
  const double q =
      0.5 * (a * delta.x() * delta.x() + 2 * b * delta.x() * delta.y() + c * delta.y() * delta.y());
  return std::exp(-q);
}

PixelRect screen_bounds(const Eigen::Vector2d& center, const Eigen::Matrix2d& cov2d,
                        double cutoff, int width, int height) {
  const double tr = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
  const double disc = std::sqrt(std::max(0.0, tr * tr - cov2d.determinant()));
  const double lambda_max = tr + disc;
  const double radius = cutoff * std::sqrt(std::max(0.0, lambda_max));
  PixelRect rect;
  rect.x0 = std::max(0, static_cast<int>(std::floor(center.x() - radius)));
  rect.x1 = std::min(width, static_cast<int>(std::ceil(center.x() + radius)) + 1);
  rect.y0 = std::max(0, static_cast<int>(std::floor(center.y() - radius)));
  rect.y1 = std::min(height, static_cast<int>(std::ceil(center.y() + radius)) + 1);
  if (rect.x1 < rect.x0) rect.x1 = rect.x0;
  if (rect.y1 < rect.y0) rect.y1 = rect.y0;
  return rect;
}

Eigen::Vector3d evaluate_sh(const std::vector<double>& coeffs, const Eigen::Vector3d& dir) {
  Eigen::Vector3d rgb(coeffs[0], coeffs[1], coeffs[2]);
  if (coeffs.size() >= 12) {
    for (int ch = 0; ch < 3; ++ch) {
      rgb[ch] += kShC1 * (-dir.y() * coeffs[3 + ch] + dir.z() * coeffs[6 + ch] -
                          dir.x() * coeffs[9 + ch]);
    }
  }
  return rgb.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace voxsplat
