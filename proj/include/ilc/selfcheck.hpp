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

// Invariant self-check suites run by the `check` command.

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ilc/cdf_table.hpp"
#include "ilc/gradcheck.hpp"
#include "ilc/iem.hpp"
#include "ilc/losses.hpp"
#include "ilc/range_coder.hpp"

namespace ilc {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

namespace check {

// Thrown by a suite on the first violated invariant.
struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

inline std::string haar() {
  Tape<double> t(false);
  const Tensor<double> block(Shape(1, 2, 2, 1), {1, 2, 3, 4});
  const auto out = haar_forward(t.constant(block)).value();
  expect(out.vec() == std::vector<double>{2.5, -1, -0.5, 0}, "hand block does not give (2.5, -1, -0.5, 0)");
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 2 * (1 + static_cast<int>(rng.below(8))), w = 2 * (1 + static_cast<int>(rng.below(8)));
    const auto x = rng.uniform_tensor<double>(Shape(1, h, w, 3));
    const auto f = haar_forward(t.constant(x)).value();
    for (int i = 0; i < h / 2; ++i)
      for (int j = 0; j < w / 2; ++j)
        for (int c = 0; c < 3; ++c) {
          const double avg = (x.at(0, 2 * i, 2 * j, c) + x.at(0, 2 * i, 2 * j + 1, c) +
                              x.at(0, 2 * i + 1, 2 * j, c) + x.at(0, 2 * i + 1, 2 * j + 1, c)) / 4;
          expect(std::abs(f.at(0, i, j, c) - avg) < 1e-15, "LL band differs from average pooling");
        }
    const double err = max_abs_diff(haar_inverse(t.constant(f)).value(), x);
    expect(err < 1e-12, "Haar round trip error " + num(err));
  }
  return "hand block exact; 20 random round trips";
}

inline std::string invconv() {
  Rng rng(12);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 3 * (1 + static_cast<int>(rng.below(16)));
    const auto w = random_orthogonal<double>(c, rng);
    const auto x = rng.normal_tensor<double>(Shape(1, 3, 3, c));
    worst = std::max(worst, max_abs_diff(invconv_inverse(invconv_forward(x, w), w), x));
  }
  expect(worst < 1e-10, "1x1 round trip error " + num(worst));
  bool threw = false;
  try {
    (void)invert_matrix(Tensor<double>(Shape(1, 1, 4, 4)));
  } catch (const InvertibilityError&) {
    threw = true;
  }
  expect(threw, "singular mixing matrix was not rejected");
  return "20 orthogonal round trips, max error " + num(worst);
}

inline std::string coupling() {
  Rng rng(13);
  {
    ParamStore<float> ps;
    const auto l = CouplingLayer::create<float>(ps, "c", 12, 8, 3, rng);
    Tape<float> t(false);
    const auto x = rng.normal_tensor<float>(Shape(1, 4, 4, 12));
    expect(coupling_forward(t, ps, l, t.constant(x)).value().vec() == x.vec() &&
               coupling_inverse(t, ps, l, t.constant(x)).value().vec() == x.vec(),
           "zero-net coupling is not the identity");
  }
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ParamStore<double> ps;
    const int c = 3 * (1 + static_cast<int>(rng.below(4)));
    const auto l = CouplingLayer::create<double>(ps, "c", c, 8, 3, rng);
    for (int i = 0; i < ps.size(); ++i)
      ps.set(i, rng.normal_tensor<double>(ps.value(i).shape(), 0.5));
    Tape<double> t(false);
    const auto x = rng.normal_tensor<double>(Shape(1, 4, 4, c));
    const auto y = coupling_forward(t, ps, l, t.constant(x));
    worst = std::max(worst, max_abs_diff(coupling_inverse(t, ps, l, y).value(), x));
  }
  expect(worst < 1e-5, "coupling round trip error " + num(worst));
  IemConfig cfg;
  cfg.levels = 2;
  cfg.widths = {8};
  cfg.kernels = {3};
  auto m = IemModel<double>::create(cfg, 3);
  randomize_iem(m, rng);
  Tape<double> t(false);
  const auto x = rng.uniform_tensor<double>(Shape(1, 8, 8, 3), 0.0, 255.0);
  const auto lat = m.encode(t, t.constant(x));
  const double iem_err = max_abs_diff(m.decode(t, lat.y, lat.z).value(), x);
  expect(iem_err < 1e-9, "IEM round trip error " + num(iem_err));
  return "100 random layers, max error " + num(worst) + "; IEM round trip " + num(iem_err);
}

inline std::string gradients() {
  IemConfig cfg;
  cfg.levels = 2;
  cfg.widths = {4};
  cfg.kernels = {3};
  cfg.couplings_per_scale = 1;
  auto iem = IemModel<double>::create(cfg, 4);
  Rng rng(14);
  randomize_iem(iem, rng, 0.3);
  auto prior = EntropyModel<double>::create(cfg.y_channels(), 5);
  const auto x = rng.uniform_tensor<double>(Shape(1, 8, 8, 3), 0.0, 255.0);
  const auto teacher = rng.normal_tensor<double>(Shape(1, 2, 2, cfg.y_channels()), 5.0);
  Tensor<double> residual;
  {
    Tape<double> t(false);
    const auto y = iem.encode(t, t.constant(x)).y.value();
    residual = y.map([](double v) { return std::nearbyint(v) - v; });
  }
  const LossWeights w{1.0, 1.0, 1.0, 1.0};
  auto loss = [&](Tape<double>& t) {
    Rng noise(15);
    return total_loss(t, iem, prior, t.constant(x), std::optional(teacher), w, noise, &residual)
        .total;
  };
  FiniteDiffOptions opts;
  opts.max_elements_per_block = 3;
  opts.step_factors = {0.1, 10.0};
  opts.resolution_tol = 1e-3;
  const double err = worst_error(finite_diff_check<double>(loss, {&iem.params, &prior.params}, 1e-4, opts));
  expect(err < 1e-3, "total-loss gradient relative error " + num(err));
  return "total loss, max relative error " + num(err);
}

inline std::string entropy() {
  const auto m = EntropyModel<double>::create(4, 16);
  Tape<double> t(false);
  const int L = 400;
  Tensor<double> grid(Shape(1, 1, 2 * L + 1, 4));
  for (int i = 0; i <= 2 * L; ++i)
    for (int c = 0; c < 4; ++c) grid.at(0, 0, i, c) = i - L;
  const auto p = m.likelihood(t, t.constant(grid)).value();
  for (int c = 0; c < 4; ++c) {
    double s = 0;
    for (int i = 0; i <= 2 * L; ++i) s += p.at(0, 0, i, c);
    expect(std::abs(s - 1.0) < 1e-6, "channel " + std::to_string(c) + " mass " + num(s));
  }
  const CdfTable tables = build_cdf_tables(m.cast<float>(), kDefaultTailMass);
  for (const auto& ch : tables.channels) {
    long total = 0;
    for (auto f : ch.freq) total += f;
    expect(total == kProbTotal, "table does not sum to the probability total");
  }
  return "mass sums to 1 per channel; tables normalized";
}

inline std::string coder() {
  const auto m = EntropyModel<float>::create(3, 17);
  const CdfTable tables = build_cdf_tables(m, kDefaultTailMass);
  Rng rng(18);
  for (int trial = 0; trial < 200; ++trial) {
    const Shape s(1, 1 + static_cast<int>(rng.below(4)), 1 + static_cast<int>(rng.below(4)), 3);
    Tensor<std::int32_t> sym(s);
    for (auto& v : sym.span()) {
      const double u = rng.uniform();
      v = u < 0.02 ? static_cast<std::int32_t>(rng.below(2000000)) - 1000000
                   : static_cast<std::int32_t>(std::lround(rng.normal() * 3));
    }
    const Bytes payload = encode_symbols(sym, tables);
    expect(decode_symbols(payload, tables, s).vec() == sym.vec(), "coder round trip mismatch");
  }
  return "200 random round trips including escapes";
}

}  // namespace check

inline const std::vector<std::pair<std::string, std::function<std::string()>>>& check_suites() {
  static const std::vector<std::pair<std::string, std::function<std::string()>>> s = {
      {"haar", check::haar},         {"invconv", check::invconv}, {"coupling", check::coupling},
      {"gradients", check::gradients}, {"entropy", check::entropy}, {"coder", check::coder}};
  return s;
}

// Runs every suite (or the named subset); exceptions count as failures.
inline std::vector<SuiteResult> run_checks(const std::vector<std::string>& only = {}) {
  std::vector<SuiteResult> out;
  for (const auto& [name, fn] : check_suites()) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    SuiteResult r;
    r.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r.detail = fn();
      r.passed = true;
    } catch (const std::exception& e) {
      r.detail = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ilc
