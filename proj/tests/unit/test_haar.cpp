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

#include <gtest/gtest.h>

#include "ilc/gradcheck.hpp"
#include "ilc/haar.hpp"
#include "ilc/ops.hpp"
#include "ilc/rng.hpp"
#include "test_support.hpp"

namespace ilc {
namespace {

TEST(Haar, HandBlock) {
  Tensor<float> x(Shape(1, 2, 2, 1), {1, 2, 3, 4});
  auto y = haar_forward(x);
  ASSERT_EQ(y.shape(), Shape(1, 1, 1, 4));
  EXPECT_EQ(y.vec(), (std::vector<float>{2.5f, -1.0f, -0.5f, 0.0f}));
  EXPECT_EQ(haar_inverse(y).vec(), x.vec());
}

TEST(Haar, ConstantImage) {
  Tensor<float> x(Shape(1, 6, 4, 3), 0.7f);
  auto y = haar_forward(x);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j)
      for (int c = 0; c < 12; ++c) EXPECT_FLOAT_EQ(y.at(0, i, j, c), c < 3 ? 0.7f : 0.0f);
}

TEST(Haar, ZeroInverse) {
  auto y = haar_inverse(Tensor<float>(Shape(1, 3, 3, 8)));
  EXPECT_EQ(y.shape(), Shape(1, 6, 6, 2));
  EXPECT_EQ(y.max_abs(), 0.0f);
}

TEST(Haar, MatchesFourTapOracle) {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const Shape s(1 + static_cast<int>(rng.below(2)), 2 * (1 + static_cast<int>(rng.below(5))),
                  2 * (1 + static_cast<int>(rng.below(5))), 1 + static_cast<int>(rng.below(5)));
    auto x = rng.normal_tensor<double>(s);
    EXPECT_LT(max_abs_diff(haar_forward(x), testing::brute_haar(x)), 1e-15);
  }
}

TEST(Haar, LowBandIsAveragePooling) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    // Multiples of 1/64 keep every sum exact in binary floating point.
    Tensor<float> x(Shape(1, 16, 16, 3));
    for (auto& v : x.span()) v = static_cast<float>(rng.below(256)) / 64.0f;
    auto y = haar_forward(x);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        for (int c = 0; c < 3; ++c) {
          const float pool = (x.at(0, 2 * i, 2 * j, c) + x.at(0, 2 * i, 2 * j + 1, c) +
                              x.at(0, 2 * i + 1, 2 * j, c) + x.at(0, 2 * i + 1, 2 * j + 1, c)) /
                             4.0f;
          ASSERT_EQ(y.at(0, i, j, c), pool);
        }
  }
}

TEST(Haar, RoundTrips) {
  Rng rng(6);
  auto x = rng.uniform_tensor<float>(Shape(1, 8, 8, 3));
  EXPECT_LT(max_abs_diff(haar_inverse(haar_forward(x)), x), 1e-6f);
  auto q = rng.normal_tensor<float>(Shape(2, 4, 4, 12));
  EXPECT_LT(max_abs_diff(haar_forward(haar_inverse(q)), q), 1e-6f);
}

TEST(Haar, ScaledEnergyIdentity) {
  Rng rng(8);
  auto x = rng.normal_tensor<double>(Shape(1, 10, 12, 2));
  auto y = haar_forward(x);
  double ex = 0, ey = 0;
  for (double v : x.span()) ex += v * v;
  for (double v : y.span()) ey += 4 * v * v;
  EXPECT_NEAR(ex, ey, 1e-10 * ex);
}

TEST(Haar, ShapeErrors) {
  EXPECT_THROW(haar_forward(Tensor<float>(Shape(1, 3, 4, 1))), ShapeError);
  try {
    haar_forward(Tensor<float>(Shape(1, 4, 5, 1)));
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("pad"), std::string::npos);
  }
  EXPECT_THROW(haar_inverse(Tensor<float>(Shape(1, 2, 2, 6))), ShapeError);
}

TEST(Haar, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  ParamStore<double> ps;
  ps.add("x", rng.normal_tensor<double>(Shape(1, 4, 6, 2)));
  ps.add("q", rng.normal_tensor<double>(Shape(1, 2, 2, 8)));
  const auto w1 = rng.normal_tensor<double>(Shape(1, 2, 3, 8));
  const auto w2 = rng.normal_tensor<double>(Shape(1, 4, 4, 2));
  auto loss = [&](Tape<double>& t) {
    auto a = sum(mul(square(haar_forward(t.param(ps, 0))), t.constant(w1)));
    auto b = sum(mul(square(haar_inverse(t.param(ps, 1))), t.constant(w2)));
    return add(a, b);
  };
  for (const auto& e : finite_diff_check<double>(loss, {&ps}, 1e-4))
    EXPECT_LT(e.max_rel_error, 1e-3) << e.name;
}

}  // namespace
}  // namespace ilc
