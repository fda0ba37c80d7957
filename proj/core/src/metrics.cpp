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

#include "voxsplat/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace voxsplat {

double psnr(const ImageF& a, const ImageF& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("psnr: shape mismatch");
  }
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse <= 0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

double depth_mae(const MapF& gt, const std::vector<double>& pred) {
  if (pred.size() != gt.data.size()) throw std::invalid_argument("depth_mae: shape mismatch");
  double acc = 0;
  int64_t count = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (gt.data[i] > 0.0f) {
      acc += std::fabs(pred[i] - static_cast<double>(gt.data[i]));
      ++count;
    }
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

VelocityReport velocity_report(const std::vector<double>& pred, const std::vector<double>& gt) {
  if (pred.size() != gt.size() || pred.size() % 3 != 0) {
    throw std::invalid_argument("velocity_report: shape mismatch");
  }
  const size_t n = pred.size() / 3;
  Eigen::Vector3d sum_pred = Eigen::Vector3d::Zero(), sum_gt = Eigen::Vector3d::Zero();
  double static_speed = 0;
  int64_t inside = 0, outside = 0;
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p(pred[i * 3], pred[i * 3 + 1], pred[i * 3 + 2]);
    const Eigen::Vector3d g(gt[i * 3], gt[i * 3 + 1], gt[i * 3 + 2]);
    if (g.squaredNorm() > 0) {
      sum_pred += p;
      sum_gt += g;
      ++inside;
    } else {
      static_speed += p.norm();
      ++outside;
    }
  }
  VelocityReport r;
  r.inside_cells = inside;
  if (inside > 0) {
    const Eigen::Vector3d mp = sum_pred / inside, mg = sum_gt / inside;
    r.gt_speed = mg.norm();
    r.pred_speed = mp.norm();
    const double denom = mp.norm() * mg.norm();
    if (denom > 1e-12) {
      const double c = std::clamp(mp.dot(mg) / denom, -1.0, 1.0);
      r.angle_deg = std::acos(c) * 180.0 / M_PI;
    } else {
      r.angle_deg = 180.0;
    }
  }
  if (outside > 0) r.static_mean_speed = static_speed / static_cast<double>(outside);
  return r;
}

std::string velocity_report_text(const VelocityReport& r) {
  std::ostringstream ss;
  ss << "velocity.inside_cells = " << r.inside_cells << "\n"
     << "velocity.gt_speed = " << r.gt_speed << "\n"
     << "velocity.pred_speed = " << r.pred_speed << "\n"
     << "velocity.angle_deg = " << r.angle_deg << "\n"
     << "velocity.static_mean_speed = " << r.static_mean_speed << "\n";
  return ss.str();
}

}  // namespace voxsplat
