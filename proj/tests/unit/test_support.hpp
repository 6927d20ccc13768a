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

// Independent reference implementations used as test oracles. Nothing here
// shares code with the library paths under test.

#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "ilc/tensor.hpp"

namespace ilc::testing {

// Nested-loop cross-correlation, NHWC input, (KH, KW, Cin, Cout) kernel.
template <class T>
Tensor<T> brute_conv2d(const Tensor<T>& x, const Tensor<T>& k, int stride, int pad) {
  const Shape xs = x.shape(), ks = k.shape();
  const int oh = (xs.h + 2 * pad - ks.n) / stride + 1;
  const int ow = (xs.w + 2 * pad - ks.h) / stride + 1;
  Tensor<T> out(Shape(xs.n, oh, ow, ks.c));
  for (int n = 0; n < xs.n; ++n)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j)
        for (int co = 0; co < ks.c; ++co) {
          double acc = 0;
          for (int a = 0; a < ks.n; ++a)
            for (int b = 0; b < ks.h; ++b) {
              const int y = i * stride - pad + a, xx = j * stride - pad + b;
              if (y < 0 || y >= xs.h || xx < 0 || xx >= xs.w) continue;
              for (int ci = 0; ci < xs.c; ++ci)
                acc += static_cast<double>(x.at(n, y, xx, ci)) * k.at(a, b, ci, co);
            }
          out.at(n, i, j, co) = static_cast<T>(acc);
        }
  return out;
}

// Multi-level Haar written directly from the four-tap block formulas.
template <class T>
Tensor<T> brute_haar(const Tensor<T>& x) {
  const Shape s = x.shape();
  Tensor<T> out(Shape(s.n, s.h / 2, s.w / 2, 4 * s.c));
  for (int n = 0; n < s.n; ++n)
    for (int i = 0; i < s.h / 2; ++i)
      for (int j = 0; j < s.w / 2; ++j)
        for (int c = 0; c < s.c; ++c) {
          const double a = x.at(n, 2 * i, 2 * j, c), b = x.at(n, 2 * i, 2 * j + 1, c);
          const double cc = x.at(n, 2 * i + 1, 2 * j, c), d = x.at(n, 2 * i + 1, 2 * j + 1, c);
          out.at(n, i, j, c) = static_cast<T>((a + b + cc + d) / 4);
          out.at(n, i, j, s.c + c) = static_cast<T>((a + b - cc - d) / 4);
          out.at(n, i, j, 2 * s.c + c) = static_cast<T>((a - b + cc - d) / 4);
          out.at(n, i, j, 3 * s.c + c) = static_cast<T>((a - b - cc + d) / 4);
        }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ilc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace ilc::testing
