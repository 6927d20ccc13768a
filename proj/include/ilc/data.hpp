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

// Training data: a flat folder of PNGs and a random rescale + crop sampler.

#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "ilc/image_io.hpp"
#include "ilc/rng.hpp"

namespace ilc {

struct Dataset {
  std::vector<std::string> names;
  std::vector<Image> images;

  [[nodiscard]] std::size_t size() const { return images.size(); }
};

// Sorted *.png paths in dir (non-recursive).
inline std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  for (const auto& p : list_pngs(dir)) {
    ds.names.push_back(p.filename().string());
    ds.images.push_back(read_png(p));
  }
  if (ds.images.empty()) throw IoError("no PNG images in " + dir.string());
  return ds;
}

inline constexpr double kMinRescale = 0.75;
inline constexpr double kMaxRescale = 1.0;

// Bilinear sample of the image rescaled by s, restricted to a crop window
// starting at (top, left) of the rescaled grid. Pixel centres are aligned.
inline Image rescaled_window(const Image& im, double s, int top, int left, int h, int w) {
  const Shape src = im.shape();
  Image out(Shape(1, h, w, src.c));
  for (int i = 0; i < h; ++i) {
    const double fy = std::clamp((top + i + 0.5) / s - 0.5, 0.0, src.h - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, src.h - 1);
    const double wy = fy - y0;
    for (int j = 0; j < w; ++j) {
      const double fx = std::clamp((left + j + 0.5) / s - 0.5, 0.0, src.w - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, src.w - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.c; ++c) {
        const double v = (1 - wy) * ((1 - wx) * im.at(0, y0, x0, c) + wx * im.at(0, y0, x1, c)) +
                         wy * ((1 - wx) * im.at(0, y1, x0, c) + wx * im.at(0, y1, x1, c));
        out.at(0, i, j, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

// Random isotropic rescale in [0.75, 1] then a uniform random crop. Images
// too small after rescaling are skipped in favour of another draw.
inline Image sample_patch(const Dataset& ds, int crop_size, Rng& rng) {
  if (ds.size() == 0) throw ConfigError("sample_patch: empty dataset");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Image& im = ds.images[rng.below(ds.size())];
    const double s = rng.uniform(kMinRescale, kMaxRescale);
    const int h = static_cast<int>(std::floor(im.shape().h * s));
    const int w = static_cast<int>(std::floor(im.shape().w * s));
    if (h < crop_size || w < crop_size) continue;
    const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - crop_size + 1)));
    const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - crop_size + 1)));
    return rescaled_window(im, s, top, left, crop_size, crop_size);
  }
  throw ConfigError("sample_patch: no image is large enough for crop " +
                    std::to_string(crop_size));
}

// Batch of patches stacked along N.
inline Image sample_batch(const Dataset& ds, int batch, int crop_size, Rng& rng) {
  Image out(Shape(batch, crop_size, crop_size, 3));
  const std::size_t per = static_cast<std::size_t>(crop_size) * crop_size * 3;
  for (int b = 0; b < batch; ++b) {
    const Image p = sample_patch(ds, crop_size, rng);
    std::copy(p.span().begin(), p.span().end(), out.span().begin() + b * per);
  }
  return out;
}

}  // namespace ilc
