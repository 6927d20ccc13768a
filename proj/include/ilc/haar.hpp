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

// Single-level 2-d Haar transform, H x W x C -> H/2 x W/2 x 4C.
//
// For each 2x2 block [a b; c d] of each channel:
//   LL = (a+b+c+d)/4   LH = (a+b-c-d)/4   HL = (a-b+c-d)/4   HH = (a-b-c+d)/4
// Output channels are grouped [LL_0..LL_{C-1}, LH_*, HL_*, HH_*], so the
// first C channels are exactly 2x2 average pooling. The inverse uses unit
// taps: a = LL+LH+HL+HH, b = LL+LH-HL-HH, c = LL-LH+HL-HH, d = LL-LH-HL+HH.

#pragma once

#include <string>

#include "ilc/autodiff.hpp"

namespace ilc {

namespace detail {

// out = scale * haar_forward_taps(in); scale 1/4 gives the forward transform.
template <class T>
void haar_analysis(const T* in, const Shape& s, T* out, T scale) {
  const int oh = s.h / 2, ow = s.w / 2, c = s.c, oc = 4 * c;
  for (int n = 0; n < s.n; ++n) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        const T* r0 = in + ((static_cast<std::size_t>(n) * s.h + 2 * i) * s.w + 2 * j) * c;
        const T* r1 = r0 + static_cast<std::size_t>(s.w) * c;
        T* o = out + ((static_cast<std::size_t>(n) * oh + i) * ow + j) * oc;
        for (int k = 0; k < c; ++k) {
          const T a = r0[k], b = r0[c + k], cc = r1[k], d = r1[c + k];
          o[k] = scale * (a + b + cc + d);
          o[c + k] = scale * (a + b - cc - d);
          o[2 * c + k] = scale * (a - b + cc - d);
          o[3 * c + k] = scale * (a - b - cc + d);
        }
      }
    }
  }
}

// out = scale * haar_inverse_taps(in); `s` is the coefficient shape.
template <class T>
void haar_synthesis(const T* in, const Shape& s, T* out, T scale) {
  const int c = s.c / 4, oh = s.h * 2, ow = s.w * 2;
  for (int n = 0; n < s.n; ++n) {
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) {
        const T* q = in + ((static_cast<std::size_t>(n) * s.h + i) * s.w + j) * s.c;
        T* r0 = out + ((static_cast<std::size_t>(n) * oh + 2 * i) * ow + 2 * j) * c;
        T* r1 = r0 + static_cast<std::size_t>(ow) * c;
        for (int k = 0; k < c; ++k) {
          const T ll = q[k], lh = q[c + k], hl = q[2 * c + k], hh = q[3 * c + k];
          r0[k] = scale * (ll + lh + hl + hh);
          r0[c + k] = scale * (ll + lh - hl - hh);
          r1[k] = scale * (ll - lh + hl - hh);
          r1[c + k] = scale * (ll - lh - hl + hh);
        }
      }
    }
  }
}

inline Shape haar_forward_shape(const Shape& s) {
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("haar_forward: spatial dims of " + s.str() +
                     " must be even; pad the image to a multiple of 2^levels first");
  }
  return {s.n, s.h / 2, s.w / 2, s.c * 4};
}

inline Shape haar_inverse_shape(const Shape& s) {
  if (s.c % 4 != 0) {
    throw ShapeError("haar_inverse: channel count of " + s.str() + " is not divisible by 4");
  }
  return {s.n, s.h * 2, s.w * 2, s.c / 4};
}

}  // namespace detail

template <class T>
Tensor<T> haar_forward(const Tensor<T>& t) {
  Tensor<T> out(detail::haar_forward_shape(t.shape()));
  detail::haar_analysis(t.data(), t.shape(), out.data(), T(0.25));
  return out;
}

template <class T>
Tensor<T> haar_inverse(const Tensor<T>& t) {
  Tensor<T> out(detail::haar_inverse_shape(t.shape()));
  detail::haar_synthesis(t.data(), t.shape(), out.data(), T(1));
  return out;
}

// The forward matrix F has entries +-1/4 and the inverse is 4 F^T, so each
// adjoint is the opposite transform with a rescaled tap set.
template <class T>
Var<T> haar_forward(const Var<T>& x) {
  Tensor<T> out = haar_forward(x.value());
  Node<T>* xn = x.node();
  return x.tape().emit(std::move(out), {&x}, [xn](Node<T>& o) {
    if (!xn->requires_grad) return;
    Tensor<T> g(xn->value.shape());
    detail::haar_synthesis(o.grad.data(), o.grad.shape(), g.data(), T(0.25));
    xn->grad_buf() += g;
  });
}

template <class T>
Var<T> haar_inverse(const Var<T>& x) {
  Tensor<T> out = haar_inverse(x.value());
  Node<T>* xn = x.node();
  return x.tape().emit(std::move(out), {&x}, [xn](Node<T>& o) {
    if (!xn->requires_grad) return;
    Tensor<T> g(xn->value.shape());
    detail::haar_analysis(o.grad.data(), o.grad.shape(), g.data(), T(1));
    xn->grad_buf() += g;
  });
}

}  // namespace ilc
