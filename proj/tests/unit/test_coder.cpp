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

#include <gtest/gtest.h>

#include <climits>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ilc/bitstream.hpp"
#include "ilc/range_coder.hpp"
#include "ilc/rng.hpp"

namespace ilc {
namespace {

ChannelTable uniform_table(int n) {
  return ChannelTable::from_probabilities(0, std::vector<double>(n, 1.0 / n), 0.0);
}

ChannelTable geometric_table(int n, double r) {
  std::vector<double> p(n);
  double z = 0;
  for (int k = 0; k < n; ++k) z += (p[k] = std::pow(r, k));
  for (auto& v : p) v /= z;
  return ChannelTable::from_probabilities(0, p, 0.0);
}

ChannelTable peaked_table() {
  return ChannelTable::from_probabilities(-1, {1e-7, 1.0 - 2e-7, 1e-7}, 0.0);
}

// Draws symbols from the table's own frequencies.
Tensor<std::int32_t> sample_grid(const CdfTable& t, Shape s, Rng& rng) {
  Tensor<std::int32_t> g(s);
  for (std::size_t i = 0; i < g.numel(); ++i) {
    const ChannelTable& ch = t[static_cast<int>(i % s.c)];
    const auto cum = ch.cumulative();
    const auto u = static_cast<std::uint32_t>(rng.below(kProbTotal));
    const int k = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()) - 1;
    g[i] = k == ch.escape() ? ch.min_symbol - 1000 : ch.min_symbol + k;
  }
  return g;
}

TEST(Tables, FrequenciesSumAndFloor) {
  for (const auto& t : {uniform_table(256), geometric_table(40, 0.6), peaked_table()}) {
    std::uint64_t sum = 0;
    for (auto f : t.freq) {
      EXPECT_GE(f, 1u);
      sum += f;
    }
    EXPECT_EQ(sum, kProbTotal);
  }
}

TEST(Tables, SerializationRoundTrip) {
  CdfTable t{{uniform_table(7), geometric_table(30, 0.8), peaked_table()}};
  Bytes b;
  ByteWriter w(b);
  t.write(w);
  ByteReader r(b);
  EXPECT_EQ(CdfTable::read(r), t);
}

TEST(Coder, UniformAlphabetCostsEightBitsPerSymbol) {
  CdfTable t{{uniform_table(256)}};
  Rng rng(1);
  Tensor<std::int32_t> g(Shape(1, 1, 1000, 1));
  for (auto& v : g.span()) v = static_cast<std::int32_t>(rng.below(256));
  const Bytes out = encode_symbols(g, t);
  EXPECT_NEAR(out.size() * 8.0, 8000.0, 80.0);
  EXPECT_EQ(decode_symbols(out, t, g.shape()).vec(), g.vec());
}

TEST(Coder, SingleSymbolAlphabetIsNearlyFree) {
  CdfTable t{{peaked_table()}};
  Tensor<std::int32_t> g(Shape(1, 10, 100, 1));
  const Bytes out = encode_symbols(g, t);
  EXPECT_LT(out.size() * 8, 100u);
  EXPECT_EQ(decode_symbols(out, t, g.shape()).vec(), g.vec());
}

TEST(Coder, RandomGridsRoundTrip) {
  Rng rng(2);
  for (int trial = 0; trial < 2000; ++trial) {
    const Shape s(1 + static_cast<int>(rng.below(2)), 1 + static_cast<int>(rng.below(6)),
                  1 + static_cast<int>(rng.below(6)), 1 + static_cast<int>(rng.below(4)));
    CdfTable t;
    for (int c = 0; c < s.c; ++c) {
      const int n = 1 + static_cast<int>(rng.below(300));
      std::vector<double> p(n);
      for (auto& v : p) v = std::pow(rng.uniform(), 4);
      double z = 0;
      for (double v : p) z += v;
      for (auto& v : p) v /= z * 1.001;
      t.channels.push_back(ChannelTable::from_probabilities(
          static_cast<std::int32_t>(rng.below(200)) - 100, p, 0.001));
    }
    Tensor<std::int32_t> g(s);
    for (auto& v : g.span()) {
      const std::uint64_t pick = rng.below(20);
      v = pick == 0   ? static_cast<std::int32_t>(rng.next_u64())
          : pick == 1 ? INT32_MIN
                      : static_cast<std::int32_t>(rng.below(400)) - 200;
    }
    const Bytes out = encode_symbols(g, t);
    ASSERT_EQ(decode_symbols(out, t, s).vec(), g.vec()) << "trial " << trial;
  }
}

TEST(Coder, LengthNearShannonBound) {
  Rng rng(3);
  for (const auto& ch : {uniform_table(64), geometric_table(60, 0.7), geometric_table(8, 0.2),
                         peaked_table()}) {
    CdfTable t{{ch}};
    auto g = sample_grid(t, Shape(1, 50, 100, 1), rng);
    const double bound = shannon_bits(g, t);
    const double bits = 8.0 * encode_symbols(g, t).size();
    EXPECT_LE(bits, 1.01 * bound + 64.0);
  }
}

TEST(Coder, EmptyGrid) {
  CdfTable t{{uniform_table(4), uniform_table(4)}};
  Tensor<std::int32_t> g(Shape(1, 0, 5, 2));
  EXPECT_TRUE(encode_symbols(g, t).empty());
  EXPECT_EQ(decode_symbols(Bytes{}, t, g.shape()).numel(), 0u);
}

TEST(Coder, TruncatedAndTrailingPayloads) {
  CdfTable t{{uniform_table(256)}};
  Tensor<std::int32_t> g(Shape(1, 1, 100, 1));
  for (int i = 0; i < 100; ++i) g[i] = i;
  Bytes out = encode_symbols(g, t);
  Bytes cut(out.begin(), out.end() - 3);
  EXPECT_THROW(decode_symbols(cut, t, g.shape()), TruncatedStream);
  out.push_back(0);
  EXPECT_THROW(decode_symbols(out, t, g.shape()), CorruptStream);
}

TEST(Coder, Deterministic) {
  CdfTable t{{geometric_table(20, 0.5), uniform_table(9)}};
  Rng a(4), b(4);
  auto g1 = sample_grid(t, Shape(1, 8, 8, 2), a);
  auto g2 = sample_grid(t, Shape(1, 8, 8, 2), b);
  EXPECT_EQ(encode_symbols(g1, t), encode_symbols(g2, t));
}

Bitstream sample_stream() {
  Bitstream bs;
  bs.header.flags = kSelfDescribing;
  bs.header.height = 30;
  bs.header.width = 17;
  bs.header.padded_height = 32;
  bs.header.padded_width = 24;
  bs.header.model_hash = 0x0123456789abcdefULL;
  bs.header.config_hash = 42;
  bs.header.latent = Shape(1, 4, 3, 2);
  bs.tables = CdfTable{{geometric_table(11, 0.5), uniform_table(5)}};
  Tensor<std::int32_t> g(bs.header.latent);
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = static_cast<std::int32_t>(i % 5);
  g[3] = -77;  // escape
  bs.payload = encode_symbols(g, *bs.tables);
  return bs;
}

TEST(Stream, RoundTrip) {
  const Bitstream bs = sample_stream();
  const Bitstream back = Bitstream::parse(bs.serialize());
  EXPECT_EQ(back.header, bs.header);
  EXPECT_EQ(back.tables, bs.tables);
  EXPECT_EQ(back.payload, bs.payload);
}

TEST(Stream, HeaderOnlyForEmptyGrid) {
  Bitstream bs;
  bs.header.latent = Shape(1, 0, 0, 3);
  const Bytes b = bs.serialize();
  EXPECT_TRUE(Bitstream::parse(b).payload.empty());
}

TEST(Stream, FlippedPayloadByteIsCorrupt) {
  Bytes b = sample_stream().serialize();
  b[b.size() - 6] ^= 0x10;
  EXPECT_THROW(Bitstream::parse(b), CorruptStream);
}

TEST(Stream, VersionMismatch) {
  Bytes b = sample_stream().serialize();
  b[4] = 9;
  EXPECT_THROW(Bitstream::parse(b), UnsupportedVersion);
}

TEST(Stream, TruncationAndGarbage) {
  Bytes b = sample_stream().serialize();
  Bytes cut(b.begin(), b.begin() + static_cast<long>(b.size()) / 2);
  EXPECT_THROW(Bitstream::parse(cut), TruncatedStream);
  Bytes longer = b;
  longer.push_back(1);
  EXPECT_THROW(Bitstream::parse(longer), CorruptStream);
  Bytes magic = b;
  magic[0] = 'X';
  EXPECT_THROW(Bitstream::parse(magic), CorruptStream);
}

// Committed bytes produced by an earlier build; any change to the table
// rounding, coder or container layout shows up here.
TEST(Stream, GoldenFixture) {
  const std::filesystem::path path = std::filesystem::path(ILC_FIXTURE_DIR) / "golden.ilc";
  const Bytes now = sample_stream().serialize();
  if (std::getenv("ILC_WRITE_FIXTURES")) {
    std::ofstream(path, std::ios::binary)
        .write(reinterpret_cast<const char*>(now.data()), static_cast<std::streamsize>(now.size()));
  }
  std::ifstream in(path, std::ios::binary);
  ASSERT_TRUE(in) << "missing fixture " << path;
  const Bytes golden((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(golden, now);
  const Bitstream bs = Bitstream::parse(golden);
  auto g = decode_symbols(bs.payload, *bs.tables, bs.header.latent);
  EXPECT_EQ(g[3], -77);
  EXPECT_EQ(g[4], 4);
}

}  // namespace
}  // namespace ilc
