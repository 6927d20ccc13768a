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

// Versioned binary checkpoints (little-endian, float32 parameters):
//
//   "ILCK" | u16 version | u16 kind | str arch | str config
//   u64 content hash (FNV-1a of every byte after this field)
//   u32 sections, each: str name | u32 n, h, w, c | f32 data
//   u8 has_state [ i64 step | f64 best_loss | str data_rng | str noise_rng
//                  | u32 len | optimizer bytes ]

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ilc/entropy_model.hpp"
#include "ilc/iem.hpp"
#include "ilc/image_io.hpp"
#include "ilc/teacher.hpp"

namespace ilc {

inline constexpr char kCheckpointMagic[4] = {'I', 'L', 'C', 'K'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint16_t { kIem = 1, kTeacher = 2 };

struct TrainState {
  long step = 0;
  double best_loss = 0;
  std::string data_rng;
  std::string noise_rng;
  Bytes optimizer;
};

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::kIem;
  std::string arch;
  std::string config;
  std::vector<std::pair<std::string, Tensor<float>>> sections;
  std::optional<TrainState> state;

  template <class T>
  void add_store(const std::string& prefix, const ParamStore<T>& store) {
    for (const auto& p : store) sections.emplace_back(prefix + p.name, p.value.template cast<float>());
  }

  // Copies every parameter of store from the matching sections.
  template <class T>
  void load_store(const std::string& prefix, ParamStore<T>& store) const {
    std::map<std::string, const Tensor<float>*> by_name;
    for (const auto& [n, t] : sections) by_name[n] = &t;
    for (int i = 0; i < store.size(); ++i) {
      const std::string name = prefix + store[i].name;
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw ShapeError("checkpoint lacks parameter " + name);
      if (it->second->shape() != store.value(i).shape()) {
        throw ShapeError("checkpoint parameter " + name + " has shape " +
                         it->second->shape().str() + ", model expects " +
                         store.value(i).shape().str());
      }
      store.set(i, it->second->template cast<T>());
    }
  }

  [[nodiscard]] Bytes serialize() const {
    Bytes body;
    ByteWriter b(body);
    b.put(static_cast<std::uint32_t>(sections.size()));
    for (const auto& [name, t] : sections) {
      b.put_string(name);
      for (int d : {t.shape().n, t.shape().h, t.shape().w, t.shape().c})
        b.put(static_cast<std::uint32_t>(d));
      for (float v : t.span()) b.put_f32(v);
    }
    b.put(static_cast<std::uint8_t>(state ? 1 : 0));
    if (state) {
      b.put(static_cast<std::int64_t>(state->step));
      b.put_f64(state->best_loss);
      b.put_string(state->data_rng);
      b.put_string(state->noise_rng);
      b.put(static_cast<std::uint32_t>(state->optimizer.size()));
      b.put_bytes(state->optimizer.data(), state->optimizer.size());
    }
    Bytes out;
    ByteWriter w(out);
    w.put_bytes(reinterpret_cast<const std::uint8_t*>(kCheckpointMagic), 4);
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint16_t>(kind));
    w.put_string(arch);
    w.put_string(config);
    w.put(fnv1a(body.data(), body.size()));
    w.put_bytes(body.data(), body.size());
    return out;
  }

  static Checkpoint parse(const Bytes& bytes) {
    try {
      ByteReader r(bytes);
      if (bytes.size() < 4 || std::memcmp(r.take(4), kCheckpointMagic, 4) != 0) {
        throw IoError("not a checkpoint (bad magic)");
      }
      const auto version = r.get<std::uint16_t>();
      if (version != kCheckpointVersion) {
        throw UnsupportedVersion("checkpoint version " + std::to_string(version));
      }
      Checkpoint c;
      c.kind = static_cast<CheckpointKind>(r.get<std::uint16_t>());
      c.arch = r.get_string();
      c.config = r.get_string();
      const auto hash = r.get<std::uint64_t>();
      const std::size_t body = r.pos();
      if (fnv1a(bytes.data() + body, bytes.size() - body) != hash) {
        throw HashMismatch("checkpoint content hash does not match");
      }
      const auto n = r.get<std::uint32_t>();
      for (std::uint32_t i = 0; i < n; ++i) {
        std::string name = r.get_string();
        std::uint32_t d[4];
        for (auto& v : d) v = r.get<std::uint32_t>();
        Tensor<float> t(Shape(static_cast<int>(d[0]), static_cast<int>(d[1]),
                              static_cast<int>(d[2]), static_cast<int>(d[3])));
        for (auto& v : t.span()) v = r.get_f32();
        c.sections.emplace_back(std::move(name), std::move(t));
      }
      if (r.get<std::uint8_t>()) {
        TrainState s;
        s.step = static_cast<long>(r.get<std::int64_t>());
        s.best_loss = r.get_f64();
        s.data_rng = r.get_string();
        s.noise_rng = r.get_string();
        const auto len = r.get<std::uint32_t>();
        const std::uint8_t* p = r.take(len);
        s.optimizer.assign(p, p + len);
        c.state = std::move(s);
      }
      if (r.remaining() != 0) throw IoError("trailing bytes in checkpoint");
      return c;
    } catch (const TruncatedStream& e) {
      throw IoError(std::string("truncated checkpoint: ") + e.what());
    }
  }

  void save(const std::filesystem::path& path) const { write_file(path, serialize()); }
  static Checkpoint load(const std::filesystem::path& path) { return parse(read_file(path)); }
};

// "name;k=v;k=v" -> map, with the leading name under key "".
inline std::map<std::string, std::string> parse_descriptor(const std::string& s) {
  std::map<std::string, std::string> out;
  std::size_t start = 0;
  bool first = true;
  while (start <= s.size()) {
    const auto end = std::min(s.find(';', start), s.size());
    const std::string tok = s.substr(start, end - start);
    if (first) {
      out[""] = tok;
      first = false;
    } else if (!tok.empty()) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw ConfigError("bad descriptor token '" + tok + "'");
      out[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    start = end + 1;
  }
  return out;
}

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(std::stoi(item));
  return v;
}

inline IemConfig iem_config_from(const std::string& describe) {
  const auto m = parse_descriptor(describe);
  if (m.at("") != "iem") throw ConfigError("not an IEM descriptor: " + describe);
  IemConfig c;
  c.in_channels = std::stoi(m.at("in"));
  c.levels = std::stoi(m.at("levels"));
  c.widths = parse_int_list(m.at("widths"));
  c.kernels = parse_int_list(m.at("kernels"));
  c.couplings_per_scale = std::stoi(m.at("couplings"));
  c.invconv = m.at("invconv") == "1";
  c.alpha = std::stod(m.at("alpha"));
  c.validate();
  return c;
}

inline TeacherConfig teacher_config_from(const std::string& describe) {
  const auto m = parse_descriptor(describe);
  if (m.at("") != "teacher") throw ConfigError("not a teacher descriptor: " + describe);
  TeacherConfig c;
  c.in_channels = std::stoi(m.at("in"));
  c.filters = std::stoi(m.at("filters"));
  c.stages = std::stoi(m.at("stages"));
  c.kernel = std::stoi(m.at("kernel"));
  c.validate();
  return c;
}

// Hash identifying a trained model: architecture text plus parameter bits.
template <class T>
std::uint64_t model_fingerprint(const std::string& arch,
                                const std::vector<const ParamStore<T>*>& stores) {
  std::uint64_t h = fnv1a(arch);
  for (const auto* s : stores)
    for (const auto& p : *s)
      for (T v : p.value.span()) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        std::uint8_t b[4] = {static_cast<std::uint8_t>(bits), static_cast<std::uint8_t>(bits >> 8),
                             static_cast<std::uint8_t>(bits >> 16),
                             static_cast<std::uint8_t>(bits >> 24)};
        h = fnv1a(b, 4, h);
      }
  return h;
}

}  // namespace ilc
