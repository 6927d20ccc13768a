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

// The four training objectives and their weighted sum. Images enter the
// models on the 0-255 scale; distortion is MSE on that scale, rate is in
// bits per source pixel, the Gaussian term is in nats per element.

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "ilc/entropy_model.hpp"
#include "ilc/iem.hpp"
#include "ilc/teacher.hpp"

namespace ilc {

inline constexpr double kPixelScale = 255.0;
inline const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Mean squared error of two images given on the 0-255 scale.
template <class T>
Var<T> distortion_loss(const Var<T>& x_hat, const Var<T>& x) {
  return mse(x_hat, x);
}

// Mean over elements of -log N(z; 0, 1).
template <class T>
Var<T> distribution_loss(const Var<T>& z) {
  return add_scalar(scale(mean(square(z)), T(0.5)), T(kHalfLog2Pi));
}

template <class T>
Var<T> distillation_loss(const Var<T>& y, const Var<T>& y_teacher) {
  if (y.shape() != y_teacher.shape()) {
    throw ShapeError("distillation: student " + y.shape().str() + " vs teacher " +
                     y_teacher.shape().str());
  }
  return mse(y, y_teacher);
}

struct LossWeights {
  double lambda1 = 1.0;   // distortion
  double lambda2 = 1.0;   // rate
  double lambda3 = 1.0;   // distribution
  double lambda4 = 1e-2;  // distillation
};

template <class T>
struct LossTerms {
  Var<T> total;
  Var<T> distortion, rate, distribution, distillation;
  double bits = 0;

  [[nodiscard]] double value(const Var<T>& v) const { return v.valid() ? v.value().item() : 0.0; }
  // First non-finite component, or empty.
  [[nodiscard]] std::string non_finite() const {
    const std::pair<const char*, const Var<T>*> parts[] = {
        {"distortion", &distortion}, {"rate", &rate}, {"distribution", &distribution},
        {"distillation", &distillation}};
    for (const auto& [name, v] : parts)
      if (v->valid() && !std::isfinite(static_cast<double>(v->value().item()))) return name;
    return {};
  }
};

// One shared encode pass feeds every term. x is on the 0-255 scale.
// teacher_y is the frozen teacher latent, or nullopt when distillation is off.
// ste_residual, when given, replaces round(y) by y + residual: same forward
// value at the point where the residual was taken and the same straight-through
// gradient, but smooth, so finite differences can probe it.
template <class T>
LossTerms<T> total_loss(Tape<T>& tape, const IemModel<T>& iem, const EntropyModel<T>& prior,
                        const Var<T>& x, const std::optional<Tensor<T>>& teacher_y,
                        const LossWeights& w, Rng& noise,
                        const Tensor<T>* ste_residual = nullptr) {
  LossTerms<T> t;
  const LatentPair<T> lat = iem.encode(tape, x);
  const double pixels = static_cast<double>(x.shape().n) * x.shape().h * x.shape().w;
  const RateTerms<T> rate = rate_loss(tape, prior, lat.y, &noise, pixels);
  t.rate = rate.bpp;
  t.bits = rate.bits.value().item();
  const Var<T> y_hat =
      ste_residual ? add(lat.y, tape.constant(*ste_residual)) : quantize(lat.y, true);
  const Var<T> z_mode = tape.constant(Tensor<T>(lat.z.shape()));
  t.distortion = distortion_loss(iem.decode(tape, y_hat, z_mode), x);
  t.distribution = distribution_loss(lat.z);
  Var<T> total = add(scale(t.distortion, T(w.lambda1)), scale(t.rate, T(w.lambda2)));
  total = add(total, scale(t.distribution, T(w.lambda3)));
  if (teacher_y) {
    t.distillation = distillation_loss(lat.y, tape.constant(*teacher_y));
    total = add(total, scale(t.distillation, T(w.lambda4)));
  }
  t.total = total;
  return t;
}

}  // namespace ilc
