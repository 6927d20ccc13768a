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

// PSNR (RGB and luma), MS-SSIM on luma, bits per pixel. Metric inputs are
// images on the 0-255 scale.

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "ilc/tensor.hpp"

namespace ilc {

inline constexpr double kPsnrCap = 100.0;

enum class PsnrMode { kRgb, kLuma };

// BT.601 full-range luma, one plane per image: (N, H, W, 1).
inline Tensor<double> luma(const Tensor<double>& rgb) {
  const Shape s = rgb.shape();
  if (s.c != 3) throw ShapeError("luma expects 3 channels, got " + s.str());
  Tensor<double> y(Shape(s.n, s.h, s.w, 1));
  for (std::size_t i = 0; i < y.numel(); ++i) {
    y[i] = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
  }
  return y;
}

inline double mse_of(const Tensor<double>& a, const Tensor<double>& b) {
  require_same_shape(a.shape(), b.shape(), "mse");
  double acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return a.numel() ? acc / static_cast<double>(a.numel()) : 0.0;
}

inline double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

inline double psnr(const Tensor<double>& a, const Tensor<double>& b,
                   PsnrMode mode = PsnrMode::kRgb) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  if (mode == PsnrMode::kLuma) return psnr_from_mse(mse_of(luma(a), luma(b)));
  return psnr_from_mse(mse_of(a, b));
}

struct MsSsimResult {
  double value = 1.0;
  int scales = 5;  // fewer than 5 means the image was too small for all
};

namespace detail {

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * w + j]; }
  [[nodiscard]] double at(int i, int j) const { return v[static_cast<std::size_t>(i) * w + j]; }
};

inline std::array<double, 11> gaussian_window() {
  std::array<double, 11> g{};
  double sum = 0;
  for (int i = 0; i < 11; ++i) sum += g[i] = std::exp(-((i - 5.0) * (i - 5.0)) / (2 * 1.5 * 1.5));
  for (auto& v : g) v /= sum;
  return g;
}

// Separable valid-mode filtering with the 11-tap Gaussian.
inline Plane blur(const Plane& p) {
  static const auto g = gaussian_window();
  Plane tmp{p.h, p.w - 10, std::vector<double>(static_cast<std::size_t>(p.h) * (p.w - 10))};
  for (int i = 0; i < tmp.h; ++i)
    for (int j = 0; j < tmp.w; ++j) {
      double acc = 0;
      for (int k = 0; k < 11; ++k) acc += g[k] * p.at(i, j + k);
      tmp.at(i, j) = acc;
    }
  Plane out{p.h - 10, tmp.w, std::vector<double>(static_cast<std::size_t>(p.h - 10) * tmp.w)};
  for (int i = 0; i < out.h; ++i)
    for (int j = 0; j < out.w; ++j) {
      double acc = 0;
      for (int k = 0; k < 11; ++k) acc += g[k] * tmp.at(i + k, j);
      out.at(i, j) = acc;
    }
  return out;
}

inline Plane mul(const Plane& a, const Plane& b) {
  Plane o = a;
  for (std::size_t i = 0; i < o.v.size(); ++i) o.v[i] *= b.v[i];
  return o;
}

inline Plane halve(const Plane& p) {
  Plane o{p.h / 2, p.w / 2, std::vector<double>(static_cast<std::size_t>(p.h / 2) * (p.w / 2))};
  for (int i = 0; i < o.h; ++i)
    for (int j = 0; j < o.w; ++j)
      o.at(i, j) = 0.25 * (p.at(2 * i, 2 * j) + p.at(2 * i, 2 * j + 1) + p.at(2 * i + 1, 2 * j) +
                           p.at(2 * i + 1, 2 * j + 1));
  return o;
}

// Mean SSIM and mean contrast-structure term over the valid window.
inline std::pair<double, double> ssim_cs(const Plane& a, const Plane& b) {
  constexpr double c1 = (0.01 * 255) * (0.01 * 255), c2 = (0.03 * 255) * (0.03 * 255);
  const Plane ma = blur(a), mb = blur(b);
  const Plane saa = blur(mul(a, a)), sbb = blur(mul(b, b)), sab = blur(mul(a, b));
  double ssim = 0, cs = 0;
  for (std::size_t i = 0; i < ma.v.size(); ++i) {
    const double mu1 = ma.v[i], mu2 = mb.v[i];
    const double v1 = saa.v[i] - mu1 * mu1, v2 = sbb.v[i] - mu2 * mu2, v12 = sab.v[i] - mu1 * mu2;
    const double c = (2 * v12 + c2) / (v1 + v2 + c2);
    cs += c;
    ssim += (2 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1) * c;
  }
  const double n = static_cast<double>(ma.v.size());
  return {ssim / n, cs / n};
}

}  // namespace detail

inline constexpr std::array<double, 5> kMsSsimWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

// Five-scale MS-SSIM on BT.601 luma of the first image in the batch.
// Negative per-scale terms are clamped to zero before exponentiation.
inline MsSsimResult ms_ssim(const Tensor<double>& a, const Tensor<double>& b) {
  require_same_shape(a.shape(), b.shape(), "ms_ssim");
  const Shape s = a.shape();
  if (std::min(s.h, s.w) < 11) throw ShapeError("ms_ssim needs images at least 11x11, got " + s.str());
  const Tensor<double> la = s.c == 3 ? luma(a) : a, lb = s.c == 3 ? luma(b) : b;
  detail::Plane pa{s.h, s.w, {}}, pb{s.h, s.w, {}};
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  pa.v.assign(la.span().begin(), la.span().begin() + static_cast<long>(plane));
  pb.v.assign(lb.span().begin(), lb.span().begin() + static_cast<long>(plane));
  int scales = 1;
  while (scales < 5 && (std::min(s.h, s.w) >> scales) >= 11) ++scales;
  double wsum = 0;
  for (int i = 0; i < scales; ++i) wsum += kMsSsimWeights[i];
  double result = 1.0;
  for (int i = 0; i < scales; ++i) {
    const auto [ssim, cs] = detail::ssim_cs(pa, pb);
    const double term = std::max(0.0, i + 1 == scales ? ssim : cs);
    result *= std::pow(term, kMsSsimWeights[i] / wsum);
    if (i + 1 < scales) {
      pa = detail::halve(pa);
      pb = detail::halve(pb);
    }
  }
  return {result, scales};
}

inline double bits_per_pixel(std::size_t payload_bytes, int height, int width) {
  if (height <= 0 || width <= 0) return 0.0;
  return 8.0 * static_cast<double>(payload_bytes) / (static_cast<double>(height) * width);
}

}  // namespace ilc
