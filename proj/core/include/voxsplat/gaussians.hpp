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

#include <vector>

#include "voxsplat/geometry.hpp"

namespace voxsplat {

/// First-order spherical-harmonics direction scale. The DC coefficient is
/// used as-is; linear terms follow the usual real-SH convention.
inline constexpr double kShC1 = 0.4886025119029199;

/// One splat, plain values. Color holds 3*(d+1)^2 coefficients, RGB-major
/// (dc_r, dc_g, dc_b, then three linear triples for degree 1).
struct GaussianPrimitive {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // world, meters
  Quaternion rotation;
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();  // meters, > 0
  double opacity = 1.0;                             // (0, 1]
  std::vector<double> color = {1, 1, 1};
};

struct ProjectedGaussian {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();  // pixels
  double depth = 0;                                  // camera z, meters
  Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
  double opacity = 1.0;
  Eigen::Vector3d rgb = Eigen::Vector3d::Ones();  // evaluated, clamped [0,1]
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;             // bounding rect, half-open
  bool empty_rect() const { return x0 >= x1 || y0 >= y1; }
};

/// Sigma = R diag(s) diag(s)^T R^T. Throws on nonpositive scale.
Eigen::Matrix3d build_covariance(const Quaternion& q, const Eigen::Vector3d& s);

/// Sigma' = J R_w Sigma R_w^T J^T + lambda_lp I.
Eigen::Matrix2d project_covariance(const Eigen::Matrix3d& sigma, const Pose& pose,
                                   const Eigen::Matrix<double, 2, 3>& J,
                                   double lambda_lp);

/// exp(-1/2 delta^T Sigma'^-1 delta). Returns 0 for a near-singular Sigma'
/// (det < 1e-12); callers treat that as a skipped primitive.
double gaussian_weight(const Eigen::Matrix2d& cov2d, const Eigen::Vector2d& delta);

struct PixelRect {
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;  // half-open
  bool empty() const { return x0 >= x1 || y0 >= y1; }
};

/// Axis-aligned rect covering the cutoff-sigma ellipse, clamped to the image.
PixelRect screen_bounds(const Eigen::Vector2d& center, const Eigen::Matrix2d& cov2d,
                        double cutoff, int width, int height);

/// Evaluates SH color toward a viewing direction and clamps to [0,1].
/// `dir` is the unit camera-to-gaussian direction (unused at degree 0).
Eigen::Vector3d evaluate_sh(const std::vector<double>& coeffs, const Eigen::Vector3d& dir);

}  // namespace voxsplat
