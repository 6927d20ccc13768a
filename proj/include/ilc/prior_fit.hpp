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

// Standalone maximum-likelihood fit of a prior to a fixed sample, used to
// calibrate the rate model and by the self-checks.

#pragma once

#include "ilc/entropy_model.hpp"
#include "ilc/optim.hpp"

namespace ilc {

struct PriorFitOptions {
  int steps = 2000;
  int batch = 1024;
  double lr = 1e-2;
  std::uint64_t seed = 1;
};

// samples: (1, 1, M, channels). Each step draws a random batch of rows and
// minimizes the noisy rate; returns the final mean bits per element.
template <class T>
double fit_prior(EntropyModel<T>& m, const Tensor<T>& samples, const PriorFitOptions& o = {}) {
  const int rows = samples.shape().w, ch = samples.shape().c;
  if (ch != m.channels) throw ShapeError("fit_prior: sample channels do not match the prior");
  Rng rng(o.seed);
  Adam<T> adam;
  double last = 0;
  for (int step = 0; step < o.steps; ++step) {
    Tensor<T> batch(Shape(1, 1, o.batch, ch));
    for (int b = 0; b < o.batch; ++b) {
      const std::size_t r = rng.below(static_cast<std::uint64_t>(rows));
      for (int c = 0; c < ch; ++c) batch[static_cast<std::size_t>(b) * ch + c] = samples[r * ch + c];
    }
    Tape<T> tape;
    const auto rate = rate_loss(tape, m, tape.constant(std::move(batch)), &rng, 1.0);
    const Var<T> loss = scale(rate.bits, T(1.0 / (static_cast<double>(o.batch) * ch)));
    last = loss.value().item();
    adam.step({&m.params}, {o.lr}, tape.backward(loss));
  }
  return last;
}

// Mean code length (bits/element) of integer samples under the prior.
template <class T>
double cross_entropy_bits(const EntropyModel<T>& m, const Tensor<T>& samples) {
  Tape<T> tape(false);
  const auto p = m.likelihood(tape, tape.constant(samples)).value();
  double bits = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) bits -= std::log2(static_cast<double>(p[i]));
  return bits / static_cast<double>(p.numel());
}

}  // namespace ilc
