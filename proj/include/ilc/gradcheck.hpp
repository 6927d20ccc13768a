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
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ilc/autodiff.hpp"
#include "ilc/rng.hpp"

namespace ilc {

template <class T>
using LossBuilder = std::function<Var<T>(Tape<T>&)>;

struct BlockError {
  std::string name;
  ParamId id;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct FiniteDiffOptions {
  // 0 checks every element; otherwise a seeded sample of this many per block.
  std::size_t max_elements_per_block = 0;
  std::uint64_t sample_seed = 1234;
  // Extra step sizes as multiples of eps. Each element keeps its smallest
  // error over all steps: a kink crossed by a large step or roundoff at a
  // small one inflates a single estimate, while a wrong adjoint disagrees
  // with every one of them.
  std::vector<double> step_factors{};
  // When positive, the relative-error denominator is floored at the
  // smallest gradient a step of size h can resolve to this tolerance,
  // 10 * machine eps * |loss| / (h * tol). Smaller gradients drown in the
  // roundoff of the difference quotient and are compared in absolute terms.
  double resolution_tol = 0.0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

// Central differences against the tape's adjoints. loss_fn must rebuild the
// graph from the current parameter values and be deterministic.
template <class T>
std::vector<BlockError> finite_diff_check(const LossBuilder<T>& loss_fn,
                                          const std::vector<ParamStore<T>*>& stores, double eps,
                                          FiniteDiffOptions opts = {}) {
  Tape<T> tape;
  const Var<T> root = loss_fn(tape);
  const GradMap<T> analytic = tape.backward(root);
  const double base = static_cast<double>(root.value().item());

  auto evaluate = [&]() {
    Tape<T> probe(false);
    return static_cast<double>(loss_fn(probe).value().item());
  };
  if (evaluate() != base) {
    throw NumericError("finite_diff_check: loss is not deterministic under a fixed seed");
  }

  Rng picker(opts.sample_seed);
  std::vector<BlockError> out;
  for (ParamStore<T>* store : stores) {
    for (int b = 0; b < store->size(); ++b) {
      Param<T>& p = (*store)[b];
      const std::size_t n = p.value.numel();
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      if (opts.max_elements_per_block && n > opts.max_elements_per_block) {
        for (std::size_t i = 0; i < opts.max_elements_per_block; ++i) {
          std::swap(idx[i], idx[i + picker.below(n - i)]);
        }
        idx.resize(opts.max_elements_per_block);
      }
      const auto it = analytic.find(store->id(b));
      BlockError be{p.name, store->id(b), 0.0, idx.size()};
      std::vector<double> steps{eps};
      for (double f : opts.step_factors) steps.push_back(eps * f);
      for (std::size_t i : idx) {
        const T orig = p.value[i];
        const double a = it == analytic.end() ? 0.0 : static_cast<double>(it->second[i]);
        double best = std::numeric_limits<double>::infinity();
        for (double h : steps) {
          p.value[i] = orig + static_cast<T>(h);
          store->touch(b);
          const double plus = evaluate();
          p.value[i] = orig - static_cast<T>(h);
          store->touch(b);
          const double minus = evaluate();
          p.value[i] = orig;
          store->touch(b);
          const double numeric = (plus - minus) / (2.0 * h);
          double e = relative_error(a, numeric);
          if (opts.resolution_tol > 0) {
            const double floor = 10.0 * std::numeric_limits<T>::epsilon() *
                                 std::max(1.0, std::abs(base)) / (h * opts.resolution_tol);
            e = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
          }
          best = std::min(best, e);
        }
        be.max_rel_error = std::max(be.max_rel_error, best);
      }
      out.push_back(be);
    }
  }
  return out;
}

inline double worst_error(const std::vector<BlockError>& errs) {
  double m = 0.0;
  for (const auto& e : errs) m = std::max(m, e.max_rel_error);
  return m;
}

}  // namespace ilc
