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

#include "voxsplat/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace voxsplat {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const ImageF& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("write_png: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png: libpng failure on " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::min(1.0, std::max(0.0, img.at(x, y, c)));
        row[static_cast<size_t>(x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageF read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("read_png: cannot open " + path);
  unsigned char header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8)) {
    throw std::runtime_error("read_png: not a PNG file: " + path);
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png: libpng failure on " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  ImageF img = ImageF::zeros(w, h);
  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_pfm(const std::string& path, const MapF& map) {
  for (float v : map.data) {
    if (std::isnan(v)) throw std::invalid_argument("write_pfm: NaN in float map");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pfm: cannot open " + path);
  out << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
  // -1.0 scale marks little-endian; rows are stored bottom-up.
  for (int y = map.height - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(map.data.data() + static_cast<size_t>(y) * map.width),
              static_cast<std::streamsize>(sizeof(float)) * map.width);
  }
  if (!out) throw std::runtime_error("write_pfm: write failed on " + path);
}

MapF read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pfm: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw std::runtime_error("read_pfm: bad magic in " + path);
  int w = 0, h = 0;
  double scl = 0;
  in >> w >> h >> scl;
  in.get();  // single whitespace after the scale
  if (w <= 0 || h <= 0) throw std::runtime_error("read_pfm: bad dimensions in " + path);
  if (scl >= 0) throw std::runtime_error("read_pfm: big-endian PFM unsupported: " + path);
  MapF map;
  map.width = w;
  map.height = h;
  map.data.resize(static_cast<size_t>(w) * h);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(map.data.data() + static_cast<size_t>(y) * w),
            static_cast<std::streamsize>(sizeof(float)) * w);
  }
  if (!in) throw std::runtime_error("read_pfm: truncated file " + path);
  return map;
}

}  // namespace voxsplat
