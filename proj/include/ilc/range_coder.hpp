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

// Carry-less 64-bit range coder (Subbotin style) over static 16-bit tables,
// and the symbol-grid codec built on it.

#pragma once

#include <cstdint>
#include <vector>

#include "ilc/cdf_table.hpp"
#include "ilc/tensor.hpp"

namespace ilc {

namespace rc {
inline constexpr std::uint64_t kTop = 1ULL << 56;
inline constexpr std::uint64_t kBot = 1ULL << 48;
}  // namespace rc

class RangeEncoder {
 public:
  explicit RangeEncoder(Bytes& out) : out_(out) {}

  void encode(std::uint32_t cum, std::uint32_t freq) {
    range_ >>= kProbBits;
    low_ += cum * range_;
    range_ *= freq;
    normalize();
  }

  void finish() {
    for (int i = 0; i < 8; ++i) {
      out_.push_back(static_cast<std::uint8_t>(low_ >> 56));
      low_ <<= 8;
    }
  }

 private:
  void normalize() {
    for (;;) {
      if ((low_ ^ (low_ + range_)) >= rc::kTop) {
        if (range_ >= rc::kBot) break;
        range_ = (0 - low_) & (rc::kBot - 1);
      }
      out_.push_back(static_cast<std::uint8_t>(low_ >> 56));
      low_ <<= 8;
      range_ <<= 8;
    }
  }

  Bytes& out_;
  std::uint64_t low_ = 0;
  std::uint64_t range_ = ~0ULL;
};

class RangeDecoder {
 public:
  RangeDecoder(const std::uint8_t* data, std::size_t size) : p_(data), n_(size) {
    for (int i = 0; i < 8; ++i) code_ = (code_ << 8) | next();
  }

  // Cumulative frequency the next symbol falls into.
  std::uint32_t peek() {
    range_ >>= kProbBits;
    const std::uint64_t v = (code_ - low_) / range_;
    if (v >= kProbTotal) throw CorruptStream("range decoder out of bounds");
    return static_cast<std::uint32_t>(v);
  }

  void consume(std::uint32_t cum, std::uint32_t freq) {
    low_ += cum * range_;
    range_ *= freq;
    for (;;) {
      if ((low_ ^ (low_ + range_)) >= rc::kTop) {
        if (range_ >= rc::kBot) break;
        range_ = (0 - low_) & (rc::kBot - 1);
      }
      code_ = (code_ << 8) | next();
      low_ <<= 8;
      range_ <<= 8;
    }
  }

  [[nodiscard]] std::size_t consumed() const { return pos_; }

 private:
  std::uint64_t next() {
    if (pos_ >= n_) throw TruncatedStream("range coder payload ended early");
    return p_[pos_++];
  }

  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
  std::uint64_t low_ = 0;
  std::uint64_t range_ = ~0ULL;
  std::uint64_t code_ = 0;
};

// Codes an integer grid (N, H, W, C) channel by channel: all of channel 0 in
// (n, h, w) order, then channel 1, and so on. Out-of-support values take the
// escape slot followed by their raw 32 bits as two uniform 16-bit halves.
inline Bytes encode_symbols(const Tensor<std::int32_t>& sym, const CdfTable& tables) {
  const Shape s = sym.shape();
  if (s.c != tables.size()) {
    throw ShapeError("symbol grid " + s.str() + " does not match " +
                     std::to_string(tables.size()) + " coder tables");
  }
  Bytes out;
  if (sym.numel() == 0) return out;
  RangeEncoder enc(out);
  const std::size_t plane = static_cast<std::size_t>(s.n) * s.h * s.w;
  for (int c = 0; c < s.c; ++c) {
    const ChannelTable& t = tables[c];
    const auto cum = t.cumulative();
    for (std::size_t i = 0; i < plane; ++i) {
      const std::int32_t v = sym[i * s.c + c];
      const int k = t.slot(v);
      enc.encode(cum[k], t.freq[k]);
      if (k == t.escape()) {
        const auto raw = static_cast<std::uint32_t>(v);
        enc.encode(raw >> 16, 1);
        enc.encode(raw & 0xFFFF, 1);
      }
    }
  }
  enc.finish();
  return out;
}

inline Tensor<std::int32_t> decode_symbols(const std::uint8_t* data, std::size_t size,
                                           const CdfTable& tables, const Shape& s) {
  if (s.c != tables.size()) {
    throw ShapeError("latent shape " + s.str() + " does not match " +
                     std::to_string(tables.size()) + " coder tables");
  }
  Tensor<std::int32_t> sym(s);
  if (sym.numel() == 0) {
    if (size != 0) throw CorruptStream("payload present for an empty symbol grid");
    return sym;
  }
  RangeDecoder dec(data, size);
  const std::size_t plane = static_cast<std::size_t>(s.n) * s.h * s.w;
  for (int c = 0; c < s.c; ++c) {
    const ChannelTable& t = tables[c];
    const auto cum = t.cumulative();
    for (std::size_t i = 0; i < plane; ++i) {
      const std::uint32_t v = dec.peek();
      const int k = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), v) - cum.begin()) - 1;
      dec.consume(cum[k], t.freq[k]);
      std::int32_t out;
      if (k == t.escape()) {
        const std::uint32_t hi = dec.peek();
        dec.consume(hi, 1);
        const std::uint32_t lo = dec.peek();
        dec.consume(lo, 1);
        out = static_cast<std::int32_t>((hi << 16) | lo);
      } else {
        out = t.min_symbol + k;
      }
      sym[i * s.c + c] = out;
    }
  }
  if (dec.consumed() != size) throw CorruptStream("trailing bytes after the coded symbols");
  return sym;
}

inline Tensor<std::int32_t> decode_symbols(const Bytes& payload, const CdfTable& tables,
                                           const Shape& s) {
  return decode_symbols(payload.data(), payload.size(), tables, s);
}

// Ideal code length of a grid under the tables, in bits.
inline double shannon_bits(const Tensor<std::int32_t>& sym, const CdfTable& tables) {
  double bits = 0;
  for (std::size_t i = 0; i < sym.numel(); ++i) {
    bits += tables[static_cast<int>(i % sym.shape().c)].bits(sym[i]);
  }
  return bits;
}

}  // namespace ilc
