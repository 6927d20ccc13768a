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

// Procedural RGB images with structure at several scales: smooth colour
// gradients, overlapping shapes with hard edges, oriented stripe textures
// and mild sensor-like noise. Used for the smoke corpus and tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "ilc/image_io.hpp"
#include "ilc/rng.hpp"

namespace ilc {

inline Image synthetic_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Image im(Shape(1, h, w, 3));
  // Background: bilinear blend of four random corner colours.
  float corner[4][3];
  for (auto& c : corner)
    for (float& v : c) v = static_cast<float>(rng.uniform(0.1, 0.9));
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const float u = static_cast<float>(i) / std::max(1, h - 1);
      const float v = static_cast<float>(j) / std::max(1, w - 1);
      for (int c = 0; c < 3; ++c) {
        im.at(0, i, j, c) = (1 - u) * ((1 - v) * corner[0][c] + v * corner[1][c]) +
                            u * ((1 - v) * corner[2][c] + v * corner[3][c]);
      }
    }
  const int shapes = 3 + static_cast<int>(rng.uniform(0, 6));
  for (int s = 0; s < shapes; ++s) {
    const double cy = rng.uniform(0, h), cx = rng.uniform(0, w);
    const double ry = rng.uniform(0.05, 0.35) * h, rx = rng.uniform(0.05, 0.35) * w;
    const double angle = rng.uniform(0, std::numbers::pi);
    const bool ellipse = rng.uniform() < 0.5;
    const bool textured = rng.uniform() < 0.4;
    const double freq = rng.uniform(0.15, 0.9), phase = rng.uniform(0, 6.3);
    const double tdir = rng.uniform(0, std::numbers::pi);
    float col[3], col2[3];
    for (int c = 0; c < 3; ++c) {
      col[c] = static_cast<float>(rng.uniform());
      col2[c] = static_cast<float>(rng.uniform());
    }
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double dy = i - cy, dx = j - cx;
        const double a = (ca * dx + sa * dy) / rx, b = (-sa * dx + ca * dy) / ry;
        const bool inside = ellipse ? a * a + b * b <= 1.0 : std::abs(a) <= 1 && std::abs(b) <= 1;
        if (!inside) continue;
        float t = 0;
        if (textured) {
          const double proj = std::cos(tdir) * j + std::sin(tdir) * i;
          t = static_cast<float>(0.5 + 0.5 * std::sin(freq * proj + phase));
        }
        for (int c = 0; c < 3; ++c) im.at(0, i, j, c) = (1 - t) * col[c] + t * col2[c];
      }
  }
  const double sigma = rng.uniform(0.0, 3.0) / 255.0;
  for (auto& v : im.span()) {
    v = std::clamp(v + static_cast<float>(rng.normal() * sigma), 0.0f, 1.0f);
  }
  return to_8bit(im);
}

}  // namespace ilc
