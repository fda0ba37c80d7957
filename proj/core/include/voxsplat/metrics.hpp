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

#include "voxsplat/image_io.hpp"

namespace voxsplat {

/// 10*log10(1/MSE) over all pixels/channels, unit dynamic range. Identical
/// images report the 99.0 dB cap.
double psnr(const ImageF& a, const ImageF& b);

/// Mean |pred - gt| in meters over pixels where gt > 0 (surface hit).
/// `pred` is row-major H*W. Returns 0 when no pixel qualifies.
double depth_mae(const MapF& gt, const std::vector<double>& pred);

/// Velocity recovery scores against the analytic per-voxel field. "Inside"
/// cells are those with nonzero ground-truth velocity.
struct VelocityReport {
  double gt_speed = 0;            // |mean gt velocity| inside
  double pred_speed = 0;          // |mean predicted velocity| inside
  double angle_deg = 0;           // between the two mean vectors
  double static_mean_speed = 0;   // mean |pred| over zero-gt cells
  int64_t inside_cells = 0;
};
VelocityReport velocity_report(const std::vector<double>& pred, const std::vector<double>& gt);

std::string velocity_report_text(const VelocityReport& r);

}  // namespace voxsplat
