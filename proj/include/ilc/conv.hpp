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

// Convolutions (im2col + GEMM) and dense per-pixel channel mixing.
//
// Kernels are laid out (KH, KW, Cin, Cout); transposed-convolution kernels
// are (KH, KW, Cout, Cin), i.e. the kernel of the conv2d they are the
// adjoint of. Biases are (1, 1, 1, Cout).

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>

#include "ilc/autodiff.hpp"

namespace ilc {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct ConvGeom {
  int n, ih, iw, ic;  // input image
  int kh, kw;
  int oh, ow;         // output grid
  int stride, pad;

  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(n) * oh * ow; }
  [[nodiscard]] std::size_t cols() const { return static_cast<std::size_t>(kh) * kw * ic; }
  [[nodiscard]] bool trivial() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

template <class T>
void im2col(const T* img, const ConvGeom& g, T* col) {
  const std::size_t k = g.cols();
  for (int b = 0; b < g.n; ++b) {
    for (int oy = 0; oy < g.oh; ++oy) {
      for (int ox = 0; ox < g.ow; ++ox) {
        T* row = col + ((static_cast<std::size_t>(b) * g.oh + oy) * g.ow + ox) * k;
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            T* dst = row + (static_cast<std::size_t>(ky) * g.kw + kx) * g.ic;
            if (iy < 0 || iy >= g.ih || ix < 0 || ix >= g.iw) {
              std::fill_n(dst, g.ic, T(0));
            } else {
              const T* src = img + ((static_cast<std::size_t>(b) * g.ih + iy) * g.iw + ix) * g.ic;
              std::copy_n(src, g.ic, dst);
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, const ConvGeom& g, T* img) {
  const std::size_t k = g.cols();
  for (int b = 0; b < g.n; ++b) {
    for (int oy = 0; oy < g.oh; ++oy) {
      for (int ox = 0; ox < g.ow; ++ox) {
        const T* row = col + ((static_cast<std::size_t>(b) * g.oh + oy) * g.ow + ox) * k;
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.ih) continue;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.iw) continue;
            const T* src = row + (static_cast<std::size_t>(ky) * g.kw + kx) * g.ic;
            T* dst = img + ((static_cast<std::size_t>(b) * g.ih + iy) * g.iw + ix) * g.ic;
            for (int c = 0; c < g.ic; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

inline void check_kernel(const Shape& ks, const char* what) {
  if (ks.n % 2 == 0 || ks.h % 2 == 0) {
    throw ShapeError(std::string(what) + ": kernel spatial dims must be odd, got " + ks.str());
  }
}

template <class T>
void add_bias(Tensor<T>& out, const Tensor<T>& b) {
  const int c = out.shape().c;
  const std::size_t pixels = out.numel() / static_cast<std::size_t>(c);
  for (std::size_t p = 0; p < pixels; ++p)
    for (int k = 0; k < c; ++k) out[p * c + k] += b[k];
}

template <class T>
void bias_grad(const Tensor<T>& gout, Tensor<T>& gb) {
  const int c = gout.shape().c;
  const std::size_t pixels = gout.numel() / static_cast<std::size_t>(c);
  for (std::size_t p = 0; p < pixels; ++p)
    for (int k = 0; k < c; ++k) gb[k] += gout[p * c + k];
}

template <class T>
void check_bias(const Var<T>* b, int channels, const char* what) {
  if (b && b->shape() != Shape::vec(channels)) {
    throw ShapeError(std::string(what) + ": bias shape " + b->shape().str() + " expected " +
                     Shape::vec(channels).str());
  }
}

}  // namespace detail

// Cross-correlation, NHWC. Output dims floor((in + 2*pad - k)/stride) + 1.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>* b, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  detail::check_kernel(ws, "conv2d");
  if (ws.w != xs.c) {
    throw ShapeError("conv2d: input " + xs.str() + " has " + std::to_string(xs.c) +
                     " channels but kernel " + ws.str() + " expects " + std::to_string(ws.w));
  }
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: invalid stride/padding");
  detail::ConvGeom g{xs.n, xs.h, xs.w, xs.c, ws.n, ws.h, 0, 0, stride, pad};
  g.oh = (xs.h + 2 * pad - ws.n) / stride + 1;
  g.ow = (xs.w + 2 * pad - ws.h) / stride + 1;
  if (g.oh <= 0 || g.ow <= 0) {
    throw ShapeError("conv2d: input " + xs.str() + " too small for kernel " + ws.str());
  }
  detail::check_bias(b, ws.c, "conv2d");
  const int co = ws.c;
  const auto rows = static_cast<Eigen::Index>(g.rows());
  const auto cols = static_cast<Eigen::Index>(g.cols());

  auto col = std::make_shared<std::vector<T>>();
  const T* colp = x.value().data();
  if (!g.trivial()) {
    col->resize(g.rows() * g.cols());
    detail::im2col(x.value().data(), g, col->data());
    colp = col->data();
  }
  Tensor<T> out(Shape(xs.n, g.oh, g.ow, co));
  detail::MatMap<T>(out.data(), rows, co).noalias() =
      detail::ConstMatMap<T>(colp, rows, cols) * detail::ConstMatMap<T>(w.value().data(), cols, co);
  if (b) detail::add_bias(out, b->value());

  Node<T>* xn = x.node();
  Node<T>* wn = w.node();
  Node<T>* bn = b ? b->node() : nullptr;
  return x.tape().emit(
      std::move(out),
      b ? std::initializer_list<const Var<T>*>{&x, &w, b}
        : std::initializer_list<const Var<T>*>{&x, &w},
      [xn, wn, bn, g, col, rows, cols, co](Node<T>& o) {
        detail::ConstMatMap<T> gy(o.grad.data(), rows, co);
        const T* colp = g.trivial() ? xn->value.data() : col->data();
        if (wn->requires_grad) {
          detail::MatMap<T>(wn->grad_buf().data(), cols, co).noalias() +=
              detail::ConstMatMap<T>(colp, rows, cols).transpose() * gy;
        }
        if (bn && bn->requires_grad) detail::bias_grad(o.grad, bn->grad_buf());
        if (xn->requires_grad) {
          detail::ConstMatMap<T> wm(wn->value.data(), cols, co);
          if (g.trivial()) {
            detail::MatMap<T>(xn->grad_buf().data(), rows, cols).noalias() += gy * wm.transpose();
          } else {
            detail::RowMat<T> gcol = gy * wm.transpose();
            detail::col2im_add(gcol.data(), g, xn->grad_buf().data());
          }
        }
      });
}

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride = 1, int pad = 0) {
  return conv2d<T>(x, w, nullptr, stride, pad);
}

// Adjoint of conv2d. Output dims (in-1)*stride - 2*pad + k + output_pad.
template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>* b, int stride, int pad,
                        int output_pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();  // (KH, KW, Cout, Cin)
  detail::check_kernel(ws, "conv_transpose2d");
  if (ws.c != xs.c) {
    throw ShapeError("conv_transpose2d: input " + xs.str() + " vs kernel " + ws.str());
  }
  if (output_pad < 0 || output_pad >= stride) {
    throw ShapeError("conv_transpose2d: output_pad must be in [0, stride)");
  }
  const int oh = (xs.h - 1) * stride - 2 * pad + ws.n + output_pad;
  const int ow = (xs.w - 1) * stride - 2 * pad + ws.h + output_pad;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv_transpose2d: empty output");
  const int co = ws.w;
  detail::check_bias(b, co, "conv_transpose2d");
  // Geometry of the forward conv mapping the (oh, ow, co) image to x's grid.
  detail::ConvGeom g{xs.n, oh, ow, co, ws.n, ws.h, xs.h, xs.w, stride, pad};
  const auto rows = static_cast<Eigen::Index>(g.rows());
  const auto cols = static_cast<Eigen::Index>(g.cols());
  const int ci = xs.c;

  detail::RowMat<T> colm = detail::ConstMatMap<T>(x.value().data(), rows, ci) *
                           detail::ConstMatMap<T>(w.value().data(), cols, ci).transpose();
  Tensor<T> out(Shape(xs.n, oh, ow, co));
  detail::col2im_add(colm.data(), g, out.data());
  if (b) detail::add_bias(out, b->value());

  Node<T>* xn = x.node();
  Node<T>* wn = w.node();
  Node<T>* bn = b ? b->node() : nullptr;
  return x.tape().emit(
      std::move(out),
      b ? std::initializer_list<const Var<T>*>{&x, &w, b}
        : std::initializer_list<const Var<T>*>{&x, &w},
      [xn, wn, bn, g, rows, cols, ci](Node<T>& o) {
        detail::RowMat<T> gcol(rows, cols);
        detail::im2col(o.grad.data(), g, gcol.data());
        if (xn->requires_grad) {
          detail::MatMap<T>(xn->grad_buf().data(), rows, ci).noalias() +=
              gcol * detail::ConstMatMap<T>(wn->value.data(), cols, ci);
        }
        if (wn->requires_grad) {
          detail::MatMap<T>(wn->grad_buf().data(), cols, ci).noalias() +=
              gcol.transpose() * detail::ConstMatMap<T>(xn->value.data(), rows, ci);
        }
        if (bn && bn->requires_grad) detail::bias_grad(o.grad, bn->grad_buf());
      });
}

// Per-pixel y = M x with M stored (1, 1, C, C), row index = output channel.
template <class T>
Var<T> channel_mix(const Var<T>& x, const Var<T>& m) {
  const Shape xs = x.shape();
  const int c = xs.c;
  if (m.shape() != Shape(1, 1, c, c)) {
    throw ShapeError("channel_mix: matrix " + m.shape().str() + " incompatible with input " +
                     xs.str());
  }
  const auto rows = static_cast<Eigen::Index>(xs.numel() / static_cast<std::size_t>(c));
  Tensor<T> out(xs);
  detail::MatMap<T>(out.data(), rows, c).noalias() =
      detail::ConstMatMap<T>(x.value().data(), rows, c) *
      detail::ConstMatMap<T>(m.value().data(), c, c).transpose();
  Node<T>* xn = x.node();
  Node<T>* mn = m.node();
  return x.tape().emit(std::move(out), {&x, &m}, [xn, mn, rows, c](Node<T>& o) {
    detail::ConstMatMap<T> gy(o.grad.data(), rows, c);
    if (xn->requires_grad) {
      detail::MatMap<T>(xn->grad_buf().data(), rows, c).noalias() +=
          gy * detail::ConstMatMap<T>(mn->value.data(), c, c);
    }
    if (mn->requires_grad) {
      detail::MatMap<T>(mn->grad_buf().data(), c, c).noalias() +=
          gy.transpose() * detail::ConstMatMap<T>(xn->value.data(), rows, c);
    }
  });
}

constexpr double kMinAbsDeterminant = 1e-12;

// LU-based inverse of a (1, 1, C, C) matrix tensor. Rejects |det| below
// kMinAbsDeterminant or any non-finite entry in the result.
template <class T>
Tensor<T> invert_matrix(const Tensor<T>& m) {
  const int c = m.shape().c;
  if (m.shape() != Shape(1, 1, c, c)) throw ShapeError("invert_matrix: not square " + m.shape().str());
  detail::RowMat<double> md = detail::ConstMatMap<T>(m.data(), c, c).template cast<double>();
  Eigen::PartialPivLU<detail::RowMat<double>> lu(md);
  const double det = lu.determinant();
  if (!std::isfinite(det) || std::abs(det) < kMinAbsDeterminant) {
    throw InvertibilityError("matrix is singular or near-singular (|det| = " +
                             std::to_string(std::abs(det)) + ")");
  }
  detail::RowMat<double> inv = lu.inverse();
  if (!inv.allFinite()) throw InvertibilityError("matrix inverse has non-finite entries");
  Tensor<T> out(m.shape());
  detail::MatMap<T>(out.data(), c, c) = inv.template cast<T>();
  return out;
}

// Differentiable inverse; `precomputed` lets callers reuse a cached LU result.
template <class T>
Var<T> matrix_inverse(const Var<T>& m, std::optional<Tensor<T>> precomputed = std::nullopt) {
  Tensor<T> inv = precomputed ? std::move(*precomputed) : invert_matrix(m.value());
  const int c = m.shape().c;
  Node<T>* mn = m.node();
  return m.tape().emit(std::move(inv), {&m}, [mn, c](Node<T>& o) {
    if (!mn->requires_grad) return;
    // d(M^-1) = -M^-1 dM M^-1  =>  gM = -M^-T gInv M^-T
    detail::ConstMatMap<T> inv(o.value.data(), c, c);
    detail::ConstMatMap<T> g(o.grad.data(), c, c);
    detail::MatMap<T>(mn->grad_buf().data(), c, c).noalias() -= inv.transpose() * g * inv.transpose();
  });
}

}  // namespace ilc
