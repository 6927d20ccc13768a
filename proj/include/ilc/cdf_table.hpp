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

// Static 16-bit frequency tables for the range coder. Each channel covers
// the symbols [min_symbol, min_symbol + n) plus one trailing escape slot for
// anything outside; every slot gets at least one count.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ilc/bytes.hpp"
#include "ilc/entropy_model.hpp"

namespace ilc {

inline constexpr int kProbBits = 16;
inline constexpr std::uint32_t kProbTotal = 1u << kProbBits;
inline constexpr int kMaxSupport = 4096;  // cap on L, support is [-L, L]
inline constexpr double kDefaultTailMass = 1e-9;

struct ChannelTable {
  std::int32_t min_symbol = 0;
  std::vector<std::uint32_t> freq;  // n symbols then the escape slot

  [[nodiscard]] int symbols() const { return static_cast<int>(freq.size()) - 1; }
  [[nodiscard]] int escape() const { return symbols(); }
  [[nodiscard]] std::vector<std::uint32_t> cumulative() const {
    std::vector<std::uint32_t> cum(freq.size() + 1, 0);
    for (std::size_t i = 0; i < freq.size(); ++i) cum[i + 1] = cum[i] + freq[i];
    return cum;
  }
  // Slot index for symbol s (the escape slot when out of range).
  [[nodiscard]] int slot(std::int64_t s) const {
    const std::int64_t i = s - min_symbol;
    return (i >= 0 && i < symbols()) ? static_cast<int>(i) : escape();
  }
  // Ideal code length of s under the table, in bits (escapes include the raw 32 bits).
  [[nodiscard]] double bits(std::int64_t s) const {
    const int k = slot(s);
    const double b = -std::log2(static_cast<double>(freq[k]) / kProbTotal);
    return k == escape() ? b + 32.0 : b;
  }

  // Deterministic float -> 16-bit rounding. probs covers the n in-range
  // symbols, escape_mass the rest.
  static ChannelTable from_probabilities(std::int32_t min_symbol, const std::vector<double>& probs,
                                         double escape_mass) {
    const std::size_t n = probs.size() + 1;
    if (n > kProbTotal) throw ConfigError("frequency table wider than the probability range");
    ChannelTable t;
    t.min_symbol = min_symbol;
    t.freq.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = i + 1 < n ? probs[i] : escape_mass;
      const double scaled = std::floor(std::max(0.0, p) * kProbTotal + 0.5);
      t.freq[i] = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::min(scaled, 65535.0)));
    }
    std::int64_t sum = std::accumulate(t.freq.begin(), t.freq.end(), std::int64_t{0});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return t.freq[a] > t.freq[b]; });
    if (sum < kProbTotal) {
      t.freq[order[0]] += static_cast<std::uint32_t>(kProbTotal - sum);
    } else {
      std::int64_t excess = sum - kProbTotal;
      for (std::size_t k = 0; k < n && excess > 0; ++k) {
        const std::int64_t take = std::min<std::int64_t>(excess, t.freq[order[k]] - 1);
        t.freq[order[k]] -= static_cast<std::uint32_t>(take);
        excess -= take;
      }
    }
    return t;
  }

  friend bool operator==(const ChannelTable&, const ChannelTable&) = default;
};

struct CdfTable {
  std::vector<ChannelTable> channels;

  [[nodiscard]] int size() const { return static_cast<int>(channels.size()); }
  const ChannelTable& operator[](int c) const { return channels.at(c); }

  void write(ByteWriter& w) const {
    w.put(static_cast<std::uint32_t>(channels.size()));
    for (const auto& ch : channels) {
      w.put(ch.min_symbol);
      w.put(static_cast<std::uint32_t>(ch.symbols()));
      for (std::uint32_t f : ch.freq) w.put(static_cast<std::uint16_t>(f - 1));
    }
  }

  static CdfTable read(ByteReader& r) {
    CdfTable t;
    const auto nc = r.get<std::uint32_t>();
    if (nc > 65536) throw CorruptStream("implausible table channel count");
    for (std::uint32_t c = 0; c < nc; ++c) {
      ChannelTable ch;
      ch.min_symbol = r.get<std::int32_t>();
      const auto n = r.get<std::uint32_t>();
      if (n + 1 > kProbTotal) throw CorruptStream("table wider than the probability range");
      std::uint64_t sum = 0;
      for (std::uint32_t i = 0; i <= n; ++i) {
        ch.freq.push_back(static_cast<std::uint32_t>(r.get<std::uint16_t>()) + 1);
        sum += ch.freq.back();
      }
      if (sum != kProbTotal) throw CorruptStream("table frequencies do not sum to 2^16");
      t.channels.push_back(std::move(ch));
    }
    return t;
  }

  friend bool operator==(const CdfTable&, const CdfTable&) = default;
};

// Tables for every channel of a prior. L is the smallest half-width whose
// combined tail mass falls below tail_mass.
template <class T>
CdfTable build_cdf_tables(const EntropyModel<T>& m, double tail_mass = kDefaultTailMass) {
  if (!(tail_mass > 0.0 && tail_mass <= 1e-6)) throw ConfigError("tail_mass must be in (0, 1e-6]");
  const PriorChain<double> ch = m.template chain<double>();
  std::vector<double> s(ch.scratch);
  CdfTable table;
  for (int c = 0; c < m.channels; ++c) {
    // lower(v) = P(X < v), upper(v) = P(X > v), both without cancellation.
    auto logit = [&](double v) { return ch.forward(c, v, s.data()); };
    auto lower = [&](double v) { return sigmoid_value(logit(v)); };
    auto upper = [&](double v) { return sigmoid_value(-logit(v)); };
    int L = 1;
    while (L < kMaxSupport && lower(-L - 0.5) + upper(L + 0.5) >= tail_mass) ++L;
    std::vector<double> probs;
    for (int k = -L; k <= L; ++k) {
      const double lo = logit(k - 0.5), up = logit(k + 0.5);
      probs.push_back(EntropyModel<double>::raw_mass(lo, up));
    }
    table.channels.push_back(
        ChannelTable::from_probabilities(-L, probs, lower(-L - 0.5) + upper(L + 0.5)));
  }
  return table;
}

}  // namespace ilc
