// Copyright 2026 The ILC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// 8-bit RGB PNG reading and writing through libpng's simplified API.
// Images live in memory as (1, H, W, 3) float tensors with values in [0, 1].

#pragma once

#include <png.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ilc/bytes.hpp"
#include "ilc/tensor.hpp"

namespace ilc {

using Image = Tensor<float>;

inline std::uint8_t to_byte(float v) {
  const float c = std::min(1.0f, std::max(0.0f, v));
  return static_cast<std::uint8_t>(std::nearbyint(c * 255.0f));
}

inline Image read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  Image out(Shape(1, static_cast<int>(img.height), static_cast<int>(img.width), 3));
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = static_cast<float>(buf[i]) / 255.0f;
  return out;
}

inline Bytes encode_png(const Image& im) {
  const Shape s = im.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("PNG writer expects (1, H, W, 3), got " + s.str());
  std::vector<std::uint8_t> buf(im.numel());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(im[i]);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(s.w);
  img.height = static_cast<png_uint_32>(s.h);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, buf.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + img.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, buf.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

inline void write_file(const std::filesystem::path& path, const Bytes& b) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return Bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

inline void write_png(const std::filesystem::path& path, const Image& im) {
  write_file(path, encode_png(im));
}

// Quantizes to 8 bits and back, as a round trip through a PNG would.
inline Image to_8bit(const Image& im) {
  return im.map([](float v) { return static_cast<float>(to_byte(v)) / 255.0f; });
}

// Replicate-edge padding of the bottom and right borders to multiples of m.
inline Image pad_to_multiple(const Image& im, int m) {
  const Shape s = im.shape();
  const int h = (s.h + m - 1) / m * m, w = (s.w + m - 1) / m * m;
  if (h == s.h && w == s.w) return im;
  Image out(Shape(s.n, h, w, s.c));
  for (int n = 0; n < s.n; ++n)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int c = 0; c < s.c; ++c)
          out.at(n, i, j, c) = im.at(n, std::min(i, s.h - 1), std::min(j, s.w - 1), c);
  return out;
}

inline Image crop(const Image& im, int h, int w) {
  const Shape s = im.shape();
  if (h > s.h || w > s.w) throw ShapeError("crop larger than image " + s.str());
  Image out(Shape(s.n, h, w, s.c));
  for (int n = 0; n < s.n; ++n)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int c = 0; c < s.c; ++c) out.at(n, i, j, c) = im.at(n, i, j, c);
  return out;
}

}  // namespace ilc
