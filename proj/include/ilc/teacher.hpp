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

// Convolutional autoencoder baseline with its own factorized prior. It
// supplies the distillation target for the IEM's coding latent and serves as
// the comparison codec.

#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "ilc/entropy_model.hpp"
#include "ilc/layers.hpp"

namespace ilc {

inline constexpr int kTeacherGroup = 2;
inline constexpr int kTeacherPriorGroup = 3;

struct TeacherConfig {
  int in_channels = 3;
  int filters = 64;
  int stages = 3;  // stride-2 convs; the first one is the input stage
  int kernel = 5;

  static TeacherConfig desk() { return {}; }
  static TeacherConfig paper() {
    TeacherConfig c;
    c.filters = 256;
    c.stages = 4;
    return c;
  }

  [[nodiscard]] int stride() const { return 1 << stages; }

  void validate() const {
    if (stages < 1 || filters < 1) throw ConfigError("teacher needs at least one stage and filter");
    if (kernel % 2 == 0) throw ConfigError("teacher kernel must be odd");
  }

  [[nodiscard]] std::string describe() const {
    std::ostringstream os;
    os << "teacher;in=" << in_channels << ";filters=" << filters << ";stages=" << stages
       << ";kernel=" << kernel;
    return os.str();
  }
};

template <class T>
class TeacherModel {
 public:
  TeacherConfig config;
  ParamStore<T> params{kTeacherGroup};
  std::vector<ConvLayer> enc;
  std::vector<ConvLayer> dec;  // transposed; weights are (K, K, Cout, Cin)
  EntropyModel<T> prior;

  static TeacherModel create(const TeacherConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    TeacherModel m;
    m.config = cfg;
    Rng rng(seed);
    const int k = cfg.kernel, f = cfg.filters;
    for (int s = 0; s < cfg.stages; ++s) {
      const int cin = s == 0 ? cfg.in_channels : f;
      m.enc.push_back(ConvLayer::create<T>(m.params, "enc" + std::to_string(s), k, cin, f, 2, rng,
                                           he_std(k, cin)));
    }
    for (int s = 0; s < cfg.stages; ++s) {
      const int cout = s + 1 == cfg.stages ? cfg.in_channels : f;
      ConvLayer l;
      l.weight = m.params.add("dec" + std::to_string(s) + ".w",
                              rng.normal_tensor<T>(Shape(k, k, cout, f), he_std(k, f) / 2));
      l.bias = m.params.add("dec" + std::to_string(s) + ".b", Tensor<T>(Shape::vec(cout)));
      l.stride = 2;
      l.pad = (k - 1) / 2;
      m.dec.push_back(l);
    }
    m.prior = EntropyModel<T>::create(f, seed ^ 0x5eedULL, {3, 3, 3}, 10.0, kTeacherPriorGroup);
    return m;
  }

  [[nodiscard]] Shape latent_shape(const Shape& x) const {
    check_input(x);
    return {x.n, x.h / config.stride(), x.w / config.stride(), config.filters};
  }

  void check_input(const Shape& x) const {
    if (x.c != config.in_channels || x.h % config.stride() != 0 || x.w % config.stride() != 0) {
      throw ShapeError("teacher expects " + std::to_string(config.in_channels) +
                       " channels and spatial dims divisible by " +
                       std::to_string(config.stride()) + ", got " + x.str());
    }
  }

  Var<T> encode(Tape<T>& tape, const Var<T>& x) const {
    check_input(x.shape());
    Var<T> h = x;
    for (std::size_t s = 0; s < enc.size(); ++s) {
      h = enc[s](tape, params, h);
      if (s + 1 < enc.size()) h = leaky_relu(h, T(kLeakySlope));
    }
    return h;
  }

  Var<T> decode(Tape<T>& tape, const Var<T>& y) const {
    if (y.shape().c != config.filters) {
      throw ShapeError("teacher decode expects " + std::to_string(config.filters) +
                       " channels, got " + y.shape().str());
    }
    Var<T> h = y;
    for (std::size_t s = 0; s < dec.size(); ++s) {
      const Var<T> w = tape.param(params, dec[s].weight);
      const Var<T> b = tape.param(params, dec[s].bias);
      h = conv_transpose2d(h, w, &b, 2, dec[s].pad, 1);
      if (s + 1 < dec.size()) h = leaky_relu(h, T(kLeakySlope));
    }
    return h;
  }

  // Value-only encode for use as a frozen distillation target.
  [[nodiscard]] Tensor<T> encode_value(const Tensor<T>& x) const {
    Tape<T> tape(false);
    return encode(tape, tape.constant(x)).value();
  }
};

}  // namespace ilc
