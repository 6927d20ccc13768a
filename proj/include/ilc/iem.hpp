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

// The invertible encoding module: per level Haar -> 1x1 channel mix ->
// coupling stack. The deepest feature map splits into the coding target
// y (first third of channels) and the auxiliary latent z (the rest).

#pragma once

#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "ilc/coupling.hpp"
#include "ilc/haar.hpp"

namespace ilc {

inline constexpr int kIemGroup = 0;

struct IemConfig {
  int in_channels = 3;
  int levels = 3;
  // One entry per coupling level; couplings occupy the last widths.size() levels.
  std::vector<int> widths{64, 128};
  std::vector<int> kernels{3, 3};
  int couplings_per_scale = 2;
  bool invconv = true;
  double alpha = 1.0;

  static IemConfig desk() { return {}; }
  static IemConfig paper() {
    IemConfig c;
    c.levels = 4;
    c.widths = {128, 256, 1024};
    c.kernels = {5, 3, 3};
    c.couplings_per_scale = 4;
    return c;
  }

  [[nodiscard]] int stride() const { return 1 << levels; }
  [[nodiscard]] int latent_channels() const { return in_channels << (2 * levels); }
  [[nodiscard]] int y_channels() const { return latent_channels() / 3; }
  [[nodiscard]] int z_channels() const { return latent_channels() - y_channels(); }
  [[nodiscard]] int first_coupling_level() const {
    return levels - static_cast<int>(widths.size());
  }

  void validate() const {
    if (levels < 1) throw ConfigError("IEM needs at least one Haar level");
    if (widths.size() != kernels.size() || static_cast<int>(widths.size()) > levels) {
      throw ConfigError("IEM widths/kernels must pair up and not exceed the level count");
    }
    if (latent_channels() % 3 != 0) throw ConfigError("IEM latent channels not divisible by 3");
    for (int k : kernels)
      if (k % 2 == 0) throw ConfigError("IEM kernels must be odd");
  }

  // Canonical text form; stored in checkpoint headers and hashed.
  [[nodiscard]] std::string describe() const {
    std::ostringstream os;
    auto list = [&os](const std::vector<int>& v) {
      for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    };
    os << "iem;in=" << in_channels << ";levels=" << levels << ";widths=";
    list(widths);
    os << ";kernels=";
    list(kernels);
    os << ";couplings=" << couplings_per_scale << ";split=1:2;invconv=" << (invconv ? 1 : 0)
       << ";alpha=" << alpha;
    return os.str();
  }
};

template <class T>
struct LatentPair {
  Var<T> y;
  Var<T> z;
};

struct IemLevel {
  int mix = -1;  // channel-mix matrix param index, -1 when ablated
  std::vector<CouplingLayer> couplings;
};

template <class T>
class IemModel {
 public:
  IemConfig config;
  ParamStore<T> params{kIemGroup};
  std::vector<IemLevel> levels;

  static IemModel create(const IemConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    IemModel m;
    m.config = cfg;
    Rng rng(seed);
    int ch = cfg.in_channels;
    for (int l = 0; l < cfg.levels; ++l) {
      ch *= 4;
      IemLevel lvl;
      const std::string pre = "l" + std::to_string(l);
      if (cfg.invconv) lvl.mix = m.params.add(pre + ".mix", identity_matrix(ch));
      const int ci = l - cfg.first_coupling_level();
      if (ci >= 0) {
        for (int k = 0; k < cfg.couplings_per_scale; ++k) {
          lvl.couplings.push_back(CouplingLayer::create<T>(
              m.params, pre + ".c" + std::to_string(k), ch, cfg.widths[ci], cfg.kernels[ci], rng,
              cfg.alpha));
        }
      }
      m.levels.push_back(std::move(lvl));
    }
    m.caches_.resize(m.levels.size());
    for (auto& c : m.caches_) c = std::make_shared<InverseCache>();
    return m;
  }

  static Tensor<T> identity_matrix(int c) {
    Tensor<T> m(Shape(1, 1, c, c));
    for (int i = 0; i < c; ++i) m[static_cast<std::size_t>(i) * c + i] = T(1);
    return m;
  }

  [[nodiscard]] Shape y_shape(const Shape& x) const {
    check_input(x);
    return {x.n, x.h / config.stride(), x.w / config.stride(), config.y_channels()};
  }
  [[nodiscard]] Shape z_shape(const Shape& x) const {
    check_input(x);
    return {x.n, x.h / config.stride(), x.w / config.stride(), config.z_channels()};
  }

  void check_input(const Shape& x) const {
    if (x.c != config.in_channels) {
      throw ShapeError("IEM expects " + std::to_string(config.in_channels) +
                       " input channels, got " + x.str());
    }
    if (x.h % config.stride() != 0 || x.w % config.stride() != 0) {
      throw ShapeError("IEM input " + x.str() + " must have spatial dims divisible by " +
                       std::to_string(config.stride()) + "; pad upstream");
    }
  }

  LatentPair<T> encode(Tape<T>& tape, const Var<T>& x) const {
    check_input(x.shape());
    Var<T> h = x;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      h = haar_forward(h);
      if (levels[l].mix >= 0) h = channel_mix(h, tape.param(params, levels[l].mix));
      for (std::size_t k = 0; k < levels[l].couplings.size(); ++k) {
        h = coupling_forward(tape, params, levels[l].couplings[k], h);
        require_finite(h, l, k);
      }
    }
    const int d = config.y_channels();
    return {slice_channels(h, 0, d), slice_channels(h, d, config.latent_channels())};
  }

  Var<T> decode(Tape<T>& tape, const Var<T>& y, const Var<T>& z) const {
    const Shape ys = y.shape(), zs = z.shape();
    if (ys.c != config.y_channels() || zs.c != config.z_channels() || ys.n != zs.n ||
        ys.h != zs.h || ys.w != zs.w) {
      throw ShapeError("IEM decode: y " + ys.str() + " / z " + zs.str() +
                       " do not match the split " + std::to_string(config.y_channels()) + ":" +
                       std::to_string(config.z_channels()));
    }
    Var<T> h = concat_channels(y, z);
    for (std::size_t l = levels.size(); l-- > 0;) {
      const auto& cs = levels[l].couplings;
      for (std::size_t k = cs.size(); k-- > 0;) {
        h = coupling_inverse(tape, params, cs[k], h);
        require_finite(h, l, k);
      }
      if (levels[l].mix >= 0) {
        const Var<T> m = tape.param(params, levels[l].mix);
        h = channel_mix(h, matrix_inverse(m, std::optional<Tensor<T>>(cached_inverse(l))));
      }
      h = haar_inverse(h);
    }
    return h;
  }

  // LU inverse of level l's mixing matrix, recomputed only when it changed.
  Tensor<T> cached_inverse(std::size_t l) const {
    InverseCache& c = *caches_.at(l);
    const Tensor<T>& w = params.value(levels[l].mix);
    std::lock_guard<std::mutex> lock(c.mu);
    if (c.source.numel() != w.numel() || c.source.vec() != w.vec()) {
      c.inverse = invert_matrix(w);
      c.source = w;
    }
    return c.inverse;
  }

  template <class U>
  [[nodiscard]] IemModel<U> cast() const {
    IemModel<U> m;
    m.config = config;
    m.params = params.template cast<U>();
    m.levels = levels;
    m.reset_caches();
    return m;
  }

  void reset_caches() {
    caches_.assign(levels.size(), nullptr);
    for (auto& c : caches_) c = std::make_shared<InverseCache>();
  }

 private:
  struct InverseCache {
    std::mutex mu;
    Tensor<T> source;
    Tensor<T> inverse;
  };

  static void require_finite(const Var<T>& h, std::size_t level, std::size_t layer) {
    if (!h.value().all_finite()) {
      throw NumericError("non-finite activation after coupling layer " + std::to_string(layer) +
                         " of level " + std::to_string(level));
    }
  }

  std::vector<std::shared_ptr<InverseCache>> caches_;
};

// Value-level 1x1 invertible convolution on a (1, 1, C, C) weight.
template <class T>
Tensor<T> invconv_forward(const Tensor<T>& t, const Tensor<T>& w) {
  Tape<T> tape(false);
  return channel_mix(tape.constant(t), tape.constant(w)).value();
}

template <class T>
Tensor<T> invconv_inverse(const Tensor<T>& t, const Tensor<T>& w) {
  Tape<T> tape(false);
  return channel_mix(tape.constant(t), tape.constant(invert_matrix(w))).value();
}

// Random orthogonal C x C matrix (QR of a Gaussian draw, sign-fixed).
template <class T>
Tensor<T> random_orthogonal(int c, Rng& rng) {
  detail::RowMat<double> g(c, c);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<detail::RowMat<double>> qr(g);
  detail::RowMat<double> q = qr.householderQ();
  const detail::RowMat<double> r = qr.matrixQR();
  for (int j = 0; j < c; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  Tensor<T> out(Shape(1, 1, c, c));
  detail::MatMap<T>(out.data(), c, c) = q.template cast<T>();
  return out;
}

// Overwrites every coupling net with random weights (final convs included)
// and every mixing matrix with a random orthogonal one. Used to probe
// invertibility away from the identity initialization.
template <class T>
void randomize_iem(IemModel<T>& m, Rng& rng, double net_scale = 0.5) {
  for (int i = 0; i < m.params.size(); ++i) {
    Param<T>& p = m.params[i];
    const Shape s = p.value.shape();
    if (p.name.ends_with(".mix")) {
      m.params.set(i, random_orthogonal<T>(s.c, rng));
    } else if (p.name.ends_with(".w")) {
      const double fan_in = static_cast<double>(s.n) * s.h * s.w;
      m.params.set(i, rng.normal_tensor<T>(s, net_scale / std::sqrt(fan_in)));
    } else {
      m.params.set(i, rng.normal_tensor<T>(s, 0.1 * net_scale));
    }
  }
}

}  // namespace ilc
