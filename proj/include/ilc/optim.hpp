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

// Adam with per-group learning rates, plus the step-decay schedule.

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ilc/autodiff.hpp"
#include "ilc/bytes.hpp"

namespace ilc {

struct LrSchedule {
  double lr_init = 1e-4;
  double gamma = 0.999995;
  long decay_start = 100000;

  [[nodiscard]] double at(long step) const {
    if (step <= decay_start) return lr_init;
    return lr_init * std::pow(gamma, static_cast<double>(step - decay_start));
  }
};

inline double lr_at(long step, const LrSchedule& s) { return s.at(step); }

template <class T>
class Adam {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long steps = 0;    // applied updates
  long skipped = 0;  // updates dropped for non-finite gradients

  struct Moments {
    Tensor<T> m, v;
  };

  // Applies one update to every store with its own learning rate. Returns
  // false, leaving everything untouched, if any gradient is non-finite.
  bool step(const std::vector<ParamStore<T>*>& stores, const std::vector<double>& lrs,
            const GradMap<T>& grads) {
    for (const auto& [id, g] : grads) {
      if (!g.all_finite()) {
        ++skipped;
        return false;
      }
    }
    ++steps;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    for (std::size_t s = 0; s < stores.size(); ++s) {
      ParamStore<T>& store = *stores[s];
      for (int i = 0; i < store.size(); ++i) {
        const auto it = grads.find(store.id(i));
        if (it == grads.end()) continue;
        const Tensor<T>& g = it->second;
        Moments& mo = moments_[store.id(i)];
        if (mo.m.numel() != g.numel()) {
          mo.m = Tensor<T>(g.shape());
          mo.v = Tensor<T>(g.shape());
        }
        Tensor<T> p = store.value(i);
        for (std::size_t k = 0; k < p.numel(); ++k) {
          const double gk = g[k];
          const double m = beta1 * mo.m[k] + (1.0 - beta1) * gk;
          const double v = beta2 * mo.v[k] + (1.0 - beta2) * gk * gk;
          mo.m[k] = static_cast<T>(m);
          mo.v[k] = static_cast<T>(v);
          p[k] = static_cast<T>(p[k] - lrs[s] * (m / c1) / (std::sqrt(v / c2) + eps));
        }
        store.set(i, std::move(p));
      }
    }
    return true;
  }

  void write(ByteWriter& w) const {
    w.put(static_cast<std::int64_t>(steps));
    w.put(static_cast<std::int64_t>(skipped));
    w.put(static_cast<std::uint32_t>(moments_.size()));
    for (const auto& [id, mo] : moments_) {
      w.put(static_cast<std::int32_t>(id.group));
      w.put(static_cast<std::int32_t>(id.index));
      w.put(static_cast<std::uint64_t>(mo.m.numel()));
      for (std::size_t k = 0; k < mo.m.numel(); ++k) w.put_f32(static_cast<float>(mo.m[k]));
      for (std::size_t k = 0; k < mo.v.numel(); ++k) w.put_f32(static_cast<float>(mo.v[k]));
    }
  }

  void read(ByteReader& r) {
    steps = r.get<std::int64_t>();
    skipped = r.get<std::int64_t>();
    moments_.clear();
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      ParamId id{r.get<std::int32_t>(), r.get<std::int32_t>()};
      const auto len = r.get<std::uint64_t>();
      Moments mo{Tensor<T>(Shape::vec(static_cast<int>(len))),
                 Tensor<T>(Shape::vec(static_cast<int>(len)))};
      for (std::size_t k = 0; k < len; ++k) mo.m[k] = static_cast<T>(r.get_f32());
      for (std::size_t k = 0; k < len; ++k) mo.v[k] = static_cast<T>(r.get_f32());
      moments_[id] = std::move(mo);
    }
  }

  [[nodiscard]] const std::map<ParamId, Moments>& moments() const { return moments_; }

 private:
  std::map<ParamId, Moments> moments_;
};

}  // namespace ilc
