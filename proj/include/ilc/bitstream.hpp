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

// The .ilc container. Layout (little-endian):
//
//   "ILC1" | u16 version | u16 flags
//   u32 height, width            source dims before padding
//   u32 padded_height, padded_width
//   u64 model_hash | u64 config_hash | u32 code_version
//   u32 latent n, h, w, c
//   [tables]                     when kSelfDescribing is set
//   u32 payload_bytes | payload
//   u32 crc32                    over every preceding byte

#pragma once

#include <optional>

#include "ilc/cdf_table.hpp"

namespace ilc {

inline constexpr char kStreamMagic[4] = {'I', 'L', 'C', '1'};
inline constexpr std::uint16_t kStreamVersion = 1;
inline constexpr std::uint32_t kCodeVersion = 1;

enum StreamFlags : std::uint16_t {
  kSelfDescribing = 1u << 0,
  kNoQuantization = 1u << 1,  // payload is raw float32 y
};

struct StreamHeader {
  std::uint16_t version = kStreamVersion;
  std::uint16_t flags = 0;
  std::uint32_t height = 0, width = 0;
  std::uint32_t padded_height = 0, padded_width = 0;
  std::uint64_t model_hash = 0;
  std::uint64_t config_hash = 0;
  std::uint32_t code_version = kCodeVersion;
  Shape latent{0, 0, 0, 0};

  [[nodiscard]] bool has(StreamFlags f) const { return (flags & f) != 0; }
  friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct Bitstream {
  StreamHeader header;
  std::optional<CdfTable> tables;
  Bytes payload;

  [[nodiscard]] Bytes serialize() const {
    if (header.has(kSelfDescribing) != tables.has_value()) {
      throw ConfigError("self-describing flag and embedded tables disagree");
    }
    Bytes out;
    ByteWriter w(out);
    w.put_bytes(reinterpret_cast<const std::uint8_t*>(kStreamMagic), 4);
    w.put(header.version);
    w.put(header.flags);
    w.put(header.height);
    w.put(header.width);
    w.put(header.padded_height);
    w.put(header.padded_width);
    w.put(header.model_hash);
    w.put(header.config_hash);
    w.put(header.code_version);
    for (int d : {header.latent.n, header.latent.h, header.latent.w, header.latent.c})
      w.put(static_cast<std::uint32_t>(d));
    if (tables) tables->write(w);
    w.put(static_cast<std::uint32_t>(payload.size()));
    w.put_bytes(payload.data(), payload.size());
    w.put(crc32_of(out.data(), out.size()));
    return out;
  }

  // Checks run in order: magic, version, structural length, CRC. Tables are
  // only parsed once the checksum has passed.
  static Bitstream parse(const Bytes& bytes) {
    ByteReader r(bytes);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kStreamMagic, 4) != 0) {
      throw CorruptStream("not an .ilc stream (bad magic)");
    }
    r.take(4);
    Bitstream bs;
    StreamHeader& h = bs.header;
    h.version = r.get<std::uint16_t>();
    if (h.version != kStreamVersion) {
      throw UnsupportedVersion("stream version " + std::to_string(h.version) +
                               ", this build reads version " + std::to_string(kStreamVersion));
    }
    h.flags = r.get<std::uint16_t>();
    h.height = r.get<std::uint32_t>();
    h.width = r.get<std::uint32_t>();
    h.padded_height = r.get<std::uint32_t>();
    h.padded_width = r.get<std::uint32_t>();
    h.model_hash = r.get<std::uint64_t>();
    h.config_hash = r.get<std::uint64_t>();
    h.code_version = r.get<std::uint32_t>();
    std::uint32_t d[4];
    for (auto& v : d) v = r.get<std::uint32_t>();
    h.latent = Shape(static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2]),
                     static_cast<int>(d[3]));
    // Walk the table block for its length only.
    const std::size_t table_start = r.pos();
    if (h.has(kSelfDescribing)) {
      const auto nc = r.get<std::uint32_t>();
      for (std::uint32_t c = 0; c < nc; ++c) {
        r.get<std::int32_t>();
        const auto n = r.get<std::uint32_t>();
        r.take((static_cast<std::size_t>(n) + 1) * 2);
      }
    }
    const std::size_t table_end = r.pos();
    const auto plen = r.get<std::uint32_t>();
    const std::uint8_t* payload = r.take(plen);
    const std::size_t body = r.pos();
    const auto crc = r.get<std::uint32_t>();
    if (r.remaining() != 0) throw CorruptStream("trailing bytes after the stream checksum");
    if (crc32_of(bytes.data(), body) != crc) throw CorruptStream("CRC mismatch");
    if (h.has(kSelfDescribing)) {
      ByteReader tr(bytes.data() + table_start, table_end - table_start);
      bs.tables = CdfTable::read(tr);
    }
    bs.payload.assign(payload, payload + plen);
    return bs;
  }
};

}  // namespace ilc
