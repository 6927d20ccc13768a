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

// Affine coupling with updates in both directions. Channels split 1:2 into
// low = h[0:d) and high = h[d:D):
//
//   low'  = low  * exp(a * psi(high)) + phi(high)
//   high' = high * exp(a * rho(low')) + eta(low')
//
// The second update reads the already-updated low part, so the inverse
// undoes high first, then low.

#pragma once

#include <string>

#include "ilc/layers.hpp"

namespace ilc {

struct CouplingLayer {
  int channels = 0;  // D
  int split = 0;     // d = D / 3
  double alpha = 1.0;
  TransformNet psi, phi, rho, eta;

  template <class T>
  static CouplingLayer create(ParamStore<T>& store, const std::string& name, int channels,
                              int width, int kernel, Rng& rng, double alpha = 1.0) {
    if (channels % 3 != 0) {
      throw ShapeError("coupling layer needs a channel count divisible by 3, got " +
                       std::to_string(channels));
    }
    CouplingLayer l;
    l.channels = channels;
    l.split = channels / 3;
    l.alpha = alpha;
    const int lo = l.split, hi = channels - l.split;
    l.psi = TransformNet::create<T>(store, name + ".psi", hi, lo, width, kernel, true, rng);
    l.phi = TransformNet::create<T>(store, name + ".phi", hi, lo, width, kernel, false, rng);
    l.rho = TransformNet::create<T>(store, name + ".rho", lo, hi, width, kernel, true, rng);
    l.eta = TransformNet::create<T>(store, name + ".eta", lo, hi, width, kernel, false, rng);
    return l;
  }

  void check(const Shape& s) const {
    if (s.c != channels) {
      throw ShapeError("coupling layer expects " + std::to_string(channels) +
                       " channels, got input " + s.str());
    }
  }
};

template <class T>
Var<T> coupling_forward(Tape<T>& tape, const ParamStore<T>& store, const CouplingLayer& l,
                        const Var<T>& h) {
  l.check(h.shape());
  const T a = static_cast<T>(l.alpha);
  const Var<T> lo = slice_channels(h, 0, l.split);
  const Var<T> hi = slice_channels(h, l.split, l.channels);
  const Var<T> lo2 =
      add(mul(lo, exp(scale(l.psi(tape, store, hi), a))), l.phi(tape, store, hi));
  const Var<T> hi2 =
      add(mul(hi, exp(scale(l.rho(tape, store, lo2), a))), l.eta(tape, store, lo2));
  return concat_channels(lo2, hi2);
}

template <class T>
Var<T> coupling_inverse(Tape<T>& tape, const ParamStore<T>& store, const CouplingLayer& l,
                        const Var<T>& h2) {
  l.check(h2.shape());
  const T a = static_cast<T>(l.alpha);
  const Var<T> lo2 = slice_channels(h2, 0, l.split);
  const Var<T> hi2 = slice_channels(h2, l.split, l.channels);
  const Var<T> hi =
      mul(sub(hi2, l.eta(tape, store, lo2)), exp(scale(l.rho(tape, store, lo2), -a)));
  Var<T> lo = mul(sub(lo2, l.phi(tape, store, hi)), exp(scale(l.psi(tape, store, hi), -a)));
#ifdef ILC_FAULT_INJECT_COUPLING
  lo = add_scalar(lo, T(1e-2));  // deliberately broken inverse for self-check testing
#endif
  return concat_channels(lo, hi);
}

}  // namespace ilc
