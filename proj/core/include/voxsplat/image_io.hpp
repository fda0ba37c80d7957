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

namespace voxsplat {

/// H x W x 3 image, values in [0,1], row-major from the top-left.
struct ImageF {
  int width = 0, height = 0;
  std::vector<double> data;  // H*W*3

  static ImageF zeros(int w, int h) {
    return {w, h, std::vector<double>(static_cast<size_t>(w) * h * 3, 0.0)};
  }
  double& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

/// H x W float map (depth, alpha, ...). Stored in memory top-down.
struct MapF {
  int width = 0, height = 0;
  std::vector<float> data;  // H*W

  float& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
};

// 8-bit RGB PNG. Quantization bounds the round-trip error by 1/510 per
// channel.
void write_png(const std::string& path, const ImageF& img);
ImageF read_png(const std::string& path);

// PFM: "Pf\n<W> <H>\n-1.0\n" header, little-endian float32 rows bottom-up.
// Round trips are bit-exact; NaNs are rejected on write.
void write_pfm(const std::string& path, const MapF& map);
MapF read_pfm(const std::string& path);

}  // namespace voxsplat
