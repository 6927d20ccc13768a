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

#pragma once

#include <cmath>
#include <string>

#include "ilc/conv.hpp"
#include "ilc/ops.hpp"
#include "ilc/rng.hpp"

namespace ilc {

inline constexpr double kLeakySlope = 0.01;

// A conv layer is just a pair of parameter indices into a ParamStore.
struct ConvLayer {
  int weight = -1;
  int bias = -1;
  int stride = 1;
  int pad = 0;

  template <class T>
  static ConvLayer create(ParamStore<T>& store, const std::string& name, int k, int cin, int cout,
                          int stride, Rng& rng, double init_std) {
    ConvLayer l;
    l.weight = store.add(name + ".w", rng.normal_tensor<T>(Shape(k, k, cin, cout), init_std));
    l.bias = store.add(name + ".b", Tensor<T>(Shape::vec(cout)));
    l.stride = stride;
    l.pad = (k - 1) / 2;
    return l;
  }

  template <class T>
  Var<T> operator()(Tape<T>& tape, const ParamStore<T>& store, const Var<T>& x) const {
    const Var<T> w = tape.param(store, weight);
    const Var<T> b = tape.param(store, bias);
    return conv2d(x, w, &b, stride, pad);
  }
};

inline double he_std(int k, int cin) { return std::sqrt(2.0 / (static_cast<double>(k) * k * cin)); }

// Bottleneck K x K -> 1 x 1 -> K x K with leaky-ReLU between stages. The last
// conv starts at zero so a fresh net is the zero function. Scale nets end in
// tanh, bounding their output to [-1, 1].
struct TransformNet {
  ConvLayer in, mid, out;
  bool bounded = false;

  template <class T>
  static TransformNet create(ParamStore<T>& store, const std::string& name, int cin, int cout,
                             int width, int k, bool bounded, Rng& rng) {
    TransformNet net;
    net.in = ConvLayer::create<T>(store, name + ".in", k, cin, width, 1, rng, he_std(k, cin));
    net.mid = ConvLayer::create<T>(store, name + ".mid", 1, width, width, 1, rng, he_std(1, width));
    net.out = ConvLayer::create<T>(store, name + ".out", k, width, cout, 1, rng, 0.0);
    net.bounded = bounded;
    return net;
  }

  template <class T>
  Var<T> operator()(Tape<T>& tape, const ParamStore<T>& store, const Var<T>& x) const {
    Var<T> h = leaky_relu(in(tape, store, x), T(kLeakySlope));
    h = leaky_relu(mid(tape, store, h), T(kLeakySlope));
    h = out(tape, store, h);
    return bounded ? tanh(h) : h;
  }
};

}  // namespace ilc
