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

// Elementwise, reduction and channel-layout primitives. Broadcasting is
// limited to scalar constants; binary ops require identical shapes.

#pragma once

#include <cmath>
#include <numbers>

#include "ilc/autodiff.hpp"

namespace ilc {

namespace detail {

// y = f(x) elementwise; dfdx(x, y) gives the local derivative.
template <class T, class F, class D>
Var<T> elementwise(const Var<T>& x, F f, D dfdx) {
  Tensor<T> out = x.value().map(f);
  Node<T>* xn = x.node();
  return x.tape().emit(std::move(out), {&x}, [xn, dfdx](Node<T>& o) {
    if (!xn->requires_grad) return;
    auto& gx = xn->grad_buf();
    const auto& xv = xn->value;
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += o.grad[i] * dfdx(xv[i], o.value[i]);
  });
}

}  // namespace detail

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  out += b.value();
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return a.tape().emit(std::move(out), {&a, &b}, [an, bn](Node<T>& o) {
    if (an->requires_grad) an->grad_buf() += o.grad;
    if (bn->requires_grad) bn->grad_buf() += o.grad;
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return a.tape().emit(std::move(out), {&a, &b}, [an, bn](Node<T>& o) {
    if (an->requires_grad) an->grad_buf() += o.grad;
    if (bn->requires_grad) {
      auto& g = bn->grad_buf();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] -= o.grad[i];
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return a.tape().emit(std::move(out), {&a, &b}, [an, bn](Node<T>& o) {
    if (an->requires_grad) {
      auto& g = an->grad_buf();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += o.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->grad_buf();
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += o.grad[i] * an->value[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& x, T s) {
  return detail::elementwise(
      x, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

template <class T>
Var<T> add_scalar(const Var<T>& x, T s) {
  return detail::elementwise(
      x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <class T>
Var<T> neg(const Var<T>& x) {
  return scale(x, T(-1));
}

template <class T>
Var<T> exp(const Var<T>& x) {
  return detail::elementwise(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Var<T> log(const Var<T>& x) {
  return detail::elementwise(
      x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  return detail::elementwise(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
T sigmoid_value(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
}

template <class T>
T softplus_value(T v) {
  return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::elementwise(
      x, [](T v) { return sigmoid_value(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> softplus(const Var<T>& x) {
  return detail::elementwise(
      x, [](T v) { return softplus_value(v); }, [](T v, T) { return sigmoid_value(v); });
}

template <class T>
Var<T> square(const Var<T>& x) {
  return detail::elementwise(
      x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.01)) {
  return detail::elementwise(
      x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

// Round half to even in the forward pass; identity adjoint.
template <class T>
T round_half_even(T v) {
  return std::nearbyint(v);  // default FE_TONEAREST mode
}

template <class T>
Var<T> round_ste(const Var<T>& x) {
  return detail::elementwise(
      x, [](T v) { return round_half_even(v); }, [](T, T) { return T(1); });
}

template <class T>
Var<T> sum(const Var<T>& x) {
  Tensor<T> out = Tensor<T>::scalar(x.value().sum());
  Node<T>* xn = x.node();
  return x.tape().emit(std::move(out), {&x}, [xn](Node<T>& o) {
    if (!xn->requires_grad) return;
    auto& g = xn->grad_buf();
    const T go = o.grad[0];
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += go;
  });
}

template <class T>
Var<T> mean(const Var<T>& x) {
  if (x.value().numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.value().numel()));
}

template <class T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mse");
  return mean(square(sub(a, b)));
}

template <class T>
Var<T> reshape(const Var<T>& x, Shape s) {
  Tensor<T> out = x.value().reshaped(s);
  Node<T>* xn = x.node();
  return x.tape().emit(std::move(out), {&x}, [xn](Node<T>& o) {
    if (!xn->requires_grad) return;
    auto& g = xn->grad_buf();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += o.grad[i];
  });
}

// Channels [begin, end) of an NHWC tensor.
template <class T>
Var<T> slice_channels(const Var<T>& x, int begin, int end) {
  const Shape s = x.shape();
  if (begin < 0 || end > s.c || begin >= end) {
    throw ShapeError("slice_channels [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + s.str());
  }
  const int oc = end - begin;
  Tensor<T> out(Shape(s.n, s.h, s.w, oc));
  const std::size_t pixels = static_cast<std::size_t>(s.n) * s.h * s.w;
  const T* src = x.value().data();
  T* dst = out.data();
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy_n(src + p * s.c + begin, oc, dst + p * oc);
  }
  Node<T>* xn = x.node();
  return x.tape().emit(std::move(out), {&x}, [xn, begin, oc, pixels, s](Node<T>& o) {
    if (!xn->requires_grad) return;
    T* g = xn->grad_buf().data();
    const T* go = o.grad.data();
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int c = 0; c < oc; ++c) g[p * s.c + begin + c] += go[p * oc + c];
    }
  });
}

template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: spatial mismatch " + sa.str() + " vs " + sb.str());
  }
  const int c = sa.c + sb.c;
  Tensor<T> out(Shape(sa.n, sa.h, sa.w, c));
  const std::size_t pixels = static_cast<std::size_t>(sa.n) * sa.h * sa.w;
  for (std::size_t p = 0; p < pixels; ++p) {
    std::copy_n(a.value().data() + p * sa.c, sa.c, out.data() + p * c);
    std::copy_n(b.value().data() + p * sb.c, sb.c, out.data() + p * c + sa.c);
  }
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return a.tape().emit(std::move(out), {&a, &b}, [an, bn, pixels, sa, sb, c](Node<T>& o) {
    const T* go = o.grad.data();
    if (an->requires_grad) {
      T* g = an->grad_buf().data();
      for (std::size_t p = 0; p < pixels; ++p)
        for (int k = 0; k < sa.c; ++k) g[p * sa.c + k] += go[p * c + k];
    }
    if (bn->requires_grad) {
      T* g = bn->grad_buf().data();
      for (std::size_t p = 0; p < pixels; ++p)
        for (int k = 0; k < sb.c; ++k) g[p * sb.c + k] += go[p * c + sa.c + k];
    }
  });
}

}  // namespace ilc
