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

// Factorized prior: one monotone cumulative function per latent channel,
// built from a short chain of affine maps with softplus-positive weights and
// tanh gates. The median is pinned at zero.

#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ilc/ops.hpp"
#include "ilc/rng.hpp"

namespace ilc {

inline constexpr int kEntropyGroup = 1;
inline constexpr double kLikelihoodFloor = 1e-9;
inline constexpr int kMaxChainWidth = 16;

// Effective (post-softplus, post-tanh) chain weights for every channel,
// evaluated in precision S.
template <class S>
struct PriorChain {
  std::vector<int> dims;             // 1, hidden..., 1
  std::vector<std::vector<S>> w;     // stage k: [c][out][in]
  std::vector<std::vector<S>> b;     // stage k: [c][out]
  std::vector<std::vector<S>> f;     // stage k < last: [c][out]
  std::vector<int> act_off, tan_off;
  int scratch = 0;

  [[nodiscard]] int stages() const { return static_cast<int>(dims.size()) - 1; }

  // Scratch layout per evaluation: stage inputs followed by tanh values.
  void layout() {
    act_off.clear();
    tan_off.clear();
    int off = 0;
    for (int k = 0; k <= stages(); ++k) {
      act_off.push_back(off);
      off += dims[k];
    }
    for (int k = 0; k + 1 < stages(); ++k) {
      tan_off.push_back(off);
      off += dims[k + 1];
    }
    scratch = off;
  }

  S forward(int c, S v, S* s) const {
    s[act_off[0]] = v;
    const int last = stages() - 1;
    for (int k = 0; k <= last; ++k) {
      const int in = dims[k], out = dims[k + 1];
      const S* W = w[k].data() + static_cast<std::size_t>(c) * out * in;
      const S* B = b[k].data() + static_cast<std::size_t>(c) * out;
      const S* h = s + act_off[k];
      S* nh = s + act_off[k + 1];
      for (int o = 0; o < out; ++o) {
        S u = B[o];
        for (int i = 0; i < in; ++i) u += W[o * in + i] * h[i];
        if (k < last) {
          const S t = std::tanh(u);
          s[tan_off[k] + o] = t;
          nh[o] = u + f[k][static_cast<std::size_t>(c) * out + o] * t;
        } else {
          nh[o] = u;
        }
      }
    }
    return s[act_off[stages()]];
  }

  // Reverse pass of forward() for upstream g. Accumulates gradients with
  // respect to the effective weights and returns d/dv.
  S backward(int c, S g, const S* s, std::vector<std::vector<S>>& gw,
             std::vector<std::vector<S>>& gb, std::vector<std::vector<S>>& gf) const {
    std::array<S, kMaxChainWidth> gout{}, gin{};
    gout[0] = g;
    for (int k = stages() - 1; k >= 0; --k) {
      const int in = dims[k], out = dims[k + 1];
      const std::size_t wo = static_cast<std::size_t>(c) * out * in;
      const std::size_t bo = static_cast<std::size_t>(c) * out;
      const S* h = s + act_off[k];
      for (int i = 0; i < in; ++i) gin[i] = S(0);
      for (int o = 0; o < out; ++o) {
        S gu = gout[o];
        if (k < stages() - 1) {
          const S t = s[tan_off[k] + o];
          gf[k][bo + o] += gu * t;
          gu *= S(1) + f[k][bo + o] * (S(1) - t * t);
        }
        gb[k][bo + o] += gu;
        for (int i = 0; i < in; ++i) {
          gw[k][wo + o * in + i] += gu * h[i];
          gin[i] += w[k][wo + o * in + i] * gu;
        }
      }
      gout = gin;
    }
    return gout[0];
  }
};

template <class T>
class EntropyModel {
 public:
  int channels = 0;
  std::vector<int> dims;
  ParamStore<T> params{kEntropyGroup};
  std::vector<int> matrix, bias, factor;  // param indices per stage

  static EntropyModel create(int channels, std::uint64_t seed,
                             const std::vector<int>& hidden = {3, 3, 3},
                             double init_scale = 10.0, int group = kEntropyGroup) {
    EntropyModel m;
    m.params = ParamStore<T>(group);
    m.channels = channels;
    m.dims = {1};
    for (int h : hidden) {
      if (h < 1 || h > kMaxChainWidth) throw ConfigError("entropy model width out of range");
      m.dims.push_back(h);
    }
    m.dims.push_back(1);
    Rng rng(seed);
    const int stages = static_cast<int>(m.dims.size()) - 1;
    const double scale = std::pow(init_scale, 1.0 / stages);
    for (int k = 0; k < stages; ++k) {
      const int in = m.dims[k], out = m.dims[k + 1];
      const double init = std::log(std::expm1(1.0 / scale / out));
      const std::string pre = "em.s" + std::to_string(k);
      m.matrix.push_back(m.params.add(pre + ".matrix",
                                      Tensor<T>(Shape(1, 1, channels, out * in), T(init))));
      m.bias.push_back(
          m.params.add(pre + ".bias", rng.uniform_tensor<T>(Shape(1, 1, channels, out), -0.5, 0.5)));
      if (k + 1 < stages) {
        m.factor.push_back(m.params.add(pre + ".factor", Tensor<T>(Shape(1, 1, channels, out))));
      }
    }
    m.center();
    return m;
  }

  // Shifts the output bias so every channel's median sits exactly at zero.
  void center() {
    const auto ch = chain<double>();
    std::vector<double> s(ch.scratch);
    Tensor<T> b = params.value(bias.back());
    for (int c = 0; c < channels; ++c) b[c] -= static_cast<T>(ch.forward(c, 0.0, s.data()));
    params.set(bias.back(), std::move(b));
  }

  [[nodiscard]] int stages() const { return static_cast<int>(dims.size()) - 1; }

  [[nodiscard]] std::string describe() const {
    std::ostringstream os;
    os << "prior;channels=" << channels << ";dims=";
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    return os.str();
  }

  template <class S>
  [[nodiscard]] PriorChain<S> chain() const {
    PriorChain<S> ch;
    ch.dims = dims;
    for (int k = 0; k < stages(); ++k) {
      std::vector<S> w, b, f;
      for (T v : params.value(matrix[k]).span()) w.push_back(softplus_value(static_cast<S>(v)));
      for (T v : params.value(bias[k]).span()) b.push_back(static_cast<S>(v));
      ch.w.push_back(std::move(w));
      ch.b.push_back(std::move(b));
      if (k + 1 < stages()) {
        for (T v : params.value(factor[k]).span()) f.push_back(std::tanh(static_cast<S>(v)));
      }
      ch.f.push_back(std::move(f));
    }
    ch.layout();
    return ch;
  }

  // Cumulative distribution of channel c at v, in double precision.
  [[nodiscard]] double cdf(int c, double v) const {
    const auto ch = chain<double>();
    std::vector<double> s(ch.scratch);
    return sigmoid_value(ch.forward(c, v, s.data()));
  }

  // Per-element probability mass of the unit bin centred on each value of y
  // (N, H, W, channels). Differentiable in y and in the model parameters.
  Var<T> likelihood(Tape<T>& tape, const Var<T>& y) const {
    if (y.shape().c != channels) {
      throw ShapeError("entropy model has " + std::to_string(channels) +
                       " channels, latent is " + y.shape().str());
    }
    std::vector<Var<T>> ps;
    for (int i = 0; i < params.size(); ++i) ps.push_back(tape.param(params, i));
    const auto ch = std::make_shared<PriorChain<T>>(chain<T>());
    const Tensor<T>& yv = y.value();
    Tensor<T> out(yv.shape());
    std::vector<T> sl(ch->scratch), su(ch->scratch);
    for (std::size_t e = 0; e < yv.numel(); ++e) {
      const int c = static_cast<int>(e % channels);
      const T lo = ch->forward(c, yv[e] - T(0.5), sl.data());
      const T up = ch->forward(c, yv[e] + T(0.5), su.data());
      out[e] = bin_mass(lo, up);
    }
    std::vector<const Var<T>*> inputs{&y};
    for (const auto& p : ps) inputs.push_back(&p);
    std::vector<Node<T>*> pn;
    for (const auto& p : ps) pn.push_back(p.node());
    Node<T>* yn = y.node();
    const int nch = channels;
    const int nst = stages();
    std::vector<int> mi = matrix, bi = bias, fi = factor;
    return tape.emit(std::move(out), inputs, [=](Node<T>& o) {
      const Tensor<T>& yv2 = yn->value;
      std::vector<std::vector<T>> gw, gb, gf;
      for (int k = 0; k < nst; ++k) {
        gw.emplace_back(ch->w[k].size(), T(0));
        gb.emplace_back(ch->b[k].size(), T(0));
        gf.emplace_back(ch->f[k].size(), T(0));
      }
      std::vector<T> sl2(ch->scratch), su2(ch->scratch);
      Tensor<T>* gy = yn->requires_grad ? &yn->grad_buf() : nullptr;
      for (std::size_t e = 0; e < yv2.numel(); ++e) {
        const T g = o.grad[e];
        if (g == T(0)) continue;
        const int c = static_cast<int>(e % nch);
        const T lo = ch->forward(c, yv2[e] - T(0.5), sl2.data());
        const T up = ch->forward(c, yv2[e] + T(0.5), su2.data());
        const T p = raw_mass(lo, up);
        // Below the floor the gradient only passes if it would raise p.
        if (p < T(kLikelihoodFloor) && g > T(0)) continue;
        const T du = g * sigmoid_value(up) * sigmoid_value(-up);
        const T dl = -g * sigmoid_value(lo) * sigmoid_value(-lo);
        T dv = ch->backward(c, du, su2.data(), gw, gb, gf);
        dv += ch->backward(c, dl, sl2.data(), gw, gb, gf);
        if (gy) (*gy)[e] += dv;
      }
      // Map effective-weight gradients back to the raw parameters.
      for (int k = 0; k < nst; ++k) {
        Node<T>* mn = pn[mi[k]];
        const Tensor<T>& raw = mn->value;
        Tensor<T>& g = mn->grad_buf();
        for (std::size_t i = 0; i < raw.numel(); ++i) g[i] += gw[k][i] * sigmoid_value(raw[i]);
        Tensor<T>& gbt = pn[bi[k]]->grad_buf();
        for (std::size_t i = 0; i < gbt.numel(); ++i) gbt[i] += gb[k][i];
        if (k + 1 < nst) {
          Node<T>* fn = pn[fi[k]];
          Tensor<T>& gft = fn->grad_buf();
          for (std::size_t i = 0; i < gft.numel(); ++i) {
            const T t = std::tanh(fn->value[i]);
            gft[i] += gf[k][i] * (T(1) - t * t);
          }
        }
      }
    });
  }

  template <class U>
  [[nodiscard]] EntropyModel<U> cast() const {
    EntropyModel<U> m;
    m.channels = channels;
    m.dims = dims;
    m.params = params.template cast<U>();
    m.matrix = matrix;
    m.bias = bias;
    m.factor = factor;
    return m;
  }

  // Mass of [v - 1/2, v + 1/2) given the two logits, computed on the side of
  // the median where the sigmoid difference does not cancel.
  static T raw_mass(T lo, T up) {
    const T s = (lo + up > T(0)) ? T(-1) : T(1);
    return std::abs(sigmoid_value(s * up) - sigmoid_value(s * lo));
  }
  static T bin_mass(T lo, T up) { return std::max(raw_mass(lo, up), T(kLikelihoodFloor)); }
};

template <class T>
struct RateTerms {
  Var<T> bits;  // total over the batch
  Var<T> bpp;   // bits per source pixel
};

// -sum log2 p.
template <class T>
Var<T> bits_from_likelihood(const Var<T>& p) {
  return scale(sum(log(p)), T(-1.0 / std::log(2.0)));
}

// Rate of y under the prior. In training mode y is perturbed by fresh
// uniform noise of one bin width; otherwise y is used as given.
template <class T>
RateTerms<T> rate_loss(Tape<T>& tape, const EntropyModel<T>& m, const Var<T>& y, Rng* noise,
                       double source_pixels) {
  Var<T> yt = y;
  if (noise) yt = add(y, tape.constant(noise->uniform_tensor<T>(y.shape(), -0.5, 0.5)));
  const Var<T> bits = bits_from_likelihood(m.likelihood(tape, yt));
  return {bits, scale(bits, T(1.0 / source_pixels))};
}

// Straight-through rounding while training, plain rounding otherwise.
template <class T>
Var<T> quantize(const Var<T>& y, bool train) {
  if (train) return round_ste(y);
  Tensor<T> q = y.value().map([](T v) { return round_half_even(v); });
  return y.tape().constant(std::move(q));
}

template <class T>
Tensor<T> quantize(const Tensor<T>& y) {
  return y.map([](T v) { return round_half_even(v); });
}

}  // namespace ilc
