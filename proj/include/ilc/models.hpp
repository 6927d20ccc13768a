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

// Trained-model bundles: a network plus its prior, with checkpoint
// conversion. Both expose the same latent-codec surface used by the codec.

#pragma once

#include <string>

#include "ilc/checkpoint.hpp"
#include "ilc/losses.hpp"

namespace ilc {

inline EntropyModel<float> prior_from(const std::string& describe, int group) {
  const auto m = parse_descriptor(describe);
  if (m.at("") != "prior") throw ConfigError("not a prior descriptor: " + describe);
  auto dims = parse_int_list(m.at("dims"));
  if (dims.size() < 3) throw ConfigError("prior descriptor needs hidden widths");
  std::vector<int> hidden(dims.begin() + 1, dims.end() - 1);
  return EntropyModel<float>::create(std::stoi(m.at("channels")), 0, hidden, 10.0, group);
}

inline std::pair<std::string, std::string> split_arch(const std::string& arch) {
  const auto bar = arch.find('|');
  if (bar == std::string::npos) throw ConfigError("bad architecture string: " + arch);
  return {arch.substr(0, bar), arch.substr(bar + 1)};
}

struct IemBundle {
  IemModel<float> iem;
  EntropyModel<float> prior;

  static IemBundle create(const IemConfig& cfg, std::uint64_t seed) {
    IemBundle b{IemModel<float>::create(cfg, seed),
                EntropyModel<float>::create(cfg.y_channels(), seed + 1)};
    return b;
  }

  [[nodiscard]] std::string arch() const { return iem.config.describe() + "|" + prior.describe(); }
  [[nodiscard]] int stride() const { return iem.config.stride(); }
  [[nodiscard]] const EntropyModel<float>& prior_model() const { return prior; }
  [[nodiscard]] std::uint64_t fingerprint() const {
    return model_fingerprint<float>(arch(), {&iem.params, &prior.params});
  }

  [[nodiscard]] Checkpoint to_checkpoint(const std::string& config) const {
    Checkpoint c;
    c.kind = CheckpointKind::kIem;
    c.arch = arch();
    c.config = config;
    c.add_store("iem/", iem.params);
    c.add_store("prior/", prior.params);
    return c;
  }

  static IemBundle from_checkpoint(const Checkpoint& c) {
    if (c.kind != CheckpointKind::kIem) throw ConfigError("checkpoint does not hold an IEM model");
    const auto [net, pri] = split_arch(c.arch);
    IemBundle b{IemModel<float>::create(iem_config_from(net), 0), prior_from(pri, kEntropyGroup)};
    c.load_store("iem/", b.iem.params);
    c.load_store("prior/", b.prior.params);
    b.iem.reset_caches();
    return b;
  }

  // x on the 0-255 scale, spatial dims divisible by stride().
  [[nodiscard]] Tensor<float> encode_latent(const Tensor<float>& x) const {
    Tape<float> t(false);
    return iem.encode(t, t.constant(x)).y.value();
  }

  [[nodiscard]] Tensor<float> decode_latent(const Tensor<float>& y, const Tensor<float>& z) const {
    Tape<float> t(false);
    return iem.decode(t, t.constant(y), t.constant(z)).value();
  }

  [[nodiscard]] Shape z_shape(const Shape& y) const {
    return {y.n, y.h, y.w, iem.config.z_channels()};
  }
};

struct TeacherBundle {
  TeacherModel<float> net;

  [[nodiscard]] std::string arch() const {
    return net.config.describe() + "|" + net.prior.describe();
  }
  [[nodiscard]] int stride() const { return net.config.stride(); }
  [[nodiscard]] const EntropyModel<float>& prior_model() const { return net.prior; }
  [[nodiscard]] std::uint64_t fingerprint() const {
    return model_fingerprint<float>(arch(), {&net.params, &net.prior.params});
  }

  [[nodiscard]] Checkpoint to_checkpoint(const std::string& config) const {
    Checkpoint c;
    c.kind = CheckpointKind::kTeacher;
    c.arch = arch();
    c.config = config;
    c.add_store("teacher/", net.params);
    c.add_store("prior/", net.prior.params);
    return c;
  }

  static TeacherBundle from_checkpoint(const Checkpoint& c) {
    if (c.kind != CheckpointKind::kTeacher) throw ConfigError("checkpoint does not hold a teacher");
    const auto [n, pri] = split_arch(c.arch);
    TeacherBundle b{TeacherModel<float>::create(teacher_config_from(n), 0)};
    b.net.prior = prior_from(pri, kTeacherPriorGroup);
    c.load_store("teacher/", b.net.params);
    c.load_store("prior/", b.net.prior.params);
    return b;
  }

  [[nodiscard]] Tensor<float> encode_latent(const Tensor<float>& x) const {
    return net.encode_value(x);
  }
  [[nodiscard]] Tensor<float> decode_latent(const Tensor<float>& y) const {
    Tape<float> t(false);
    return net.decode(t, t.constant(y)).value();
  }
};

}  // namespace ilc
