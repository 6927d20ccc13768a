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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ilc/errors.hpp"

namespace ilc {

// Dense 4-d shape in N,H,W,C order. Kernels reuse the same slots as
// (KH, KW, Cin, Cout); parameter vectors live in the trailing dims.
struct Shape {
  int n = 1;
  int h = 1;
  int w = 1;
  int c = 1;

  constexpr Shape() = default;
  constexpr Shape(int n_, int h_, int w_, int c_) : n(n_), h(h_), w(w_), c(c_) {}

  static constexpr Shape scalar() { return {1, 1, 1, 1}; }
  static constexpr Shape vec(int len) { return {1, 1, 1, len}; }

  [[nodiscard]] constexpr std::size_t numel() const {
    return static_cast<std::size_t>(n) * h * w * c;
  }
  [[nodiscard]] constexpr bool is_scalar() const { return numel() == 1; }
  [[nodiscard]] constexpr std::array<int, 4> dims() const { return {n, h, w, c}; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  [[nodiscard]] std::string str() const {
    std::ostringstream os;
    os << '[' << n << 'x' << h << 'x' << w << 'x' << c << ']';
    return os.str();
  }
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

// Contiguous NHWC tensor with value semantics.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : shape_(0, 0, 0, 0) {}
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {
    validate_shape();
  }
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_.numel()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape::scalar(), v); }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t numel() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::span<T> span() { return data_; }
  [[nodiscard]] std::span<const T> span() const { return data_; }
  [[nodiscard]] T* data() { return data_.data(); }
  [[nodiscard]] const T* data() const { return data_.data(); }
  [[nodiscard]] const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] std::size_t index(int n, int h, int w, int c) const {
    return ((static_cast<std::size_t>(n) * shape_.h + h) * shape_.w + w) * shape_.c + c;
  }
  T& at(int n, int h, int w, int c) { return data_[index(n, h, w, c)]; }
  const T& at(int n, int h, int w, int c) const { return data_[index(n, h, w, c)]; }

  [[nodiscard]] T item() const {
    if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_.str());
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  [[nodiscard]] Tensor reshaped(Shape s) const {
    if (s.numel() != numel()) {
      throw ShapeError("reshape " + shape_.str() + " -> " + s.str() + " changes element count");
    }
    Tensor out = *this;
    out.shape_ = s;
    return out;
  }

  template <class F>
  [[nodiscard]] Tensor map(F&& f) const {
    Tensor out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = f(data_[i]);
    return out;
  }

  template <class U>
  [[nodiscard]] Tensor<U> cast() const {
    std::vector<U> v(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) v[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(v));
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(shape_, o.shape_, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  [[nodiscard]] bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  // NaN/Inf detection; a no-op in release builds unless ILC_CHECK_FINITE is set.
  void check_finite([[maybe_unused]] const char* where) const {
#if !defined(NDEBUG) || defined(ILC_CHECK_FINITE)
    if (!all_finite()) throw NumericError(std::string("non-finite value produced by ") + where);
#endif
  }

  [[nodiscard]] T sum() const {
    T s = T(0);
    for (T v : data_) s += v;
    return s;
  }
  [[nodiscard]] T max_abs() const {
    T m = T(0);
    for (T v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  void validate_shape() const {
    if (shape_.n < 0 || shape_.h < 0 || shape_.w < 0 || shape_.c < 0) {
      throw ShapeError("negative dimension in shape " + shape_.str());
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

template <class T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  T m = T(0);
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ilc
