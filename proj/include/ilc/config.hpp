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

// Run configuration: a flat key = value text format. Every field has a
// canonical spelling so a config can be written back and hashed.

#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ilc/bitstream.hpp"
#include "ilc/bytes.hpp"
#include "ilc/cdf_table.hpp"
#include "ilc/iem.hpp"
#include "ilc/losses.hpp"
#include "ilc/optim.hpp"
#include "ilc/teacher.hpp"

namespace ilc {

struct RunConfig {
  std::string command;
  std::string preset = "desk";
  // Paths.
  std::string data_dir;
  std::string eval_dir;
  std::string teacher;     // teacher checkpoint used for distillation / prior init
  std::string checkpoint;  // model checkpoint for compress / decompress / eval
  std::string output;      // output directory or file
  std::string resume;      // training checkpoint to resume from
  // Objective.
  LossWeights weights{0.5, 1.0, 0.01, 0.01};
  double lambda_rd = 0.01;  // teacher: rate + lambda_rd * distortion
  // Ablations.
  bool no1x1 = false;
  bool noKDM = false;
  // Optimization.
  std::uint64_t seed = 1;
  long steps = 5000;
  int batch = 4;
  int crop = 64;
  double lr_iem = 1e-4;
  double lr_em = 1e-3;
  double lr_teacher = 1e-3;
  double gamma = 0.999995;
  long decay_start = 100000;
  // Bookkeeping.
  long log_every = 1;
  long eval_every = 500;
  long checkpoint_every = 1000;
  int eval_images = 8;
  int eval_crop = 128;
  // Codec.
  bool nq = false;
  double sample_z = 0.0;
  double tail_mass = kDefaultTailMass;
  bool self_describing = true;

  [[nodiscard]] IemConfig iem_config() const {
    IemConfig c = preset == "paper" ? IemConfig::paper() : IemConfig::desk();
    c.invconv = !no1x1;
    return c;
  }
  [[nodiscard]] TeacherConfig teacher_config() const {
    return preset == "paper" ? TeacherConfig::paper() : TeacherConfig::desk();
  }
  [[nodiscard]] LrSchedule iem_schedule() const { return {lr_iem, gamma, decay_start}; }
  [[nodiscard]] LrSchedule em_schedule() const { return {lr_em, gamma, decay_start}; }
  [[nodiscard]] LrSchedule teacher_schedule() const { return {lr_teacher, gamma, decay_start}; }

  [[nodiscard]] std::string ablation_tag() const {
    std::string s;
    if (no1x1) s += "no1x1";
    if (noKDM) s += std::string(s.empty() ? "" : ",") + "noKDM";
    return s.empty() ? "none" : s;
  }

  void set(const std::string& key, const std::string& value) {
    for (auto& f : fields()) {
      if (f.key == key) {
        try {
          f.set(*this, value);
        } catch (const std::exception&) {
          throw ConfigError("bad value for " + key + ": '" + value + "'");
        }
        validate();
        return;
      }
    }
    throw ConfigError("unknown config key '" + key + "'");
  }

  [[nodiscard]] std::string get(const std::string& key) const {
    for (const auto& f : fields())
      if (f.key == key) return f.get(*this);
    throw ConfigError("unknown config key '" + key + "'");
  }

  void validate() const {
    if (preset != "desk" && preset != "paper") throw ConfigError("preset must be desk or paper");
    for (double l : {weights.lambda1, weights.lambda2, weights.lambda3, weights.lambda4, lambda_rd})
      if (!(l >= 0.0)) throw ConfigError("loss weights must be non-negative");
    if (batch < 1 || crop < 1 || steps < 0) throw ConfigError("batch, crop and steps must be positive");
    if (!(tail_mass > 0.0 && tail_mass <= 1e-6)) throw ConfigError("tail_mass must be in (0, 1e-6]");
    if (sample_z < 0) throw ConfigError("sample_z must be non-negative");
  }

  // "key = value" lines; blank lines and '#' comments ignored.
  void load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) continue;
      if (eq == std::string::npos) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
      }
      set(key, trim(line.substr(eq + 1)));
    }
  }

  // Canonical text of everything that shapes the produced artifacts. Paths
  // that only say where things go (output, resume) are left out so a resumed
  // or relocated run writes identical bytes.
  [[nodiscard]] std::string provenance() const {
    std::ostringstream os;
    for (const auto& f : fields()) {
      if (f.key == "output" || f.key == "resume") continue;
      os << f.key << " = " << f.get(*this) << "\n";
    }
    return os.str();
  }

  [[nodiscard]] std::uint64_t hash() const { return fnv1a(provenance()); }

  // Provenance block stored in checkpoints: the config plus its hash and the
  // code version that produced the artifact.
  [[nodiscard]] std::string artifact_provenance() const {
    return provenance() + "config_hash = " + hex64(hash()) +
           "\ncode_version = " + std::to_string(kCodeVersion) + "\n";
  }

 private:
  struct Field {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
  };

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }

  static bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("not a boolean: " + v);
  }

  static const std::vector<Field>& fields() {
    using R = RunConfig;
    auto str = [](std::string R::*m, const char* k) {
      return Field{k, [m](R& r, const std::string& v) { r.*m = v; },
                   [m](const R& r) { return r.*m; }};
    };
    auto dbl = [](auto getter, const char* k) {
      return Field{k, [getter](R& r, const std::string& v) { getter(r) = std::stod(v); },
                   [getter](const R& r) { return fmt(getter(const_cast<R&>(r))); }};
    };
    auto lng = [](auto getter, const char* k) {
      return Field{k,
                   [getter](R& r, const std::string& v) {
                     std::size_t pos = 0;
                     const long long x = std::stoll(v, &pos);
                     if (pos != v.size()) throw ConfigError("trailing characters");
                     getter(r) = static_cast<std::remove_reference_t<decltype(getter(r))>>(x);
                   },
                   [getter](const R& r) { return std::to_string(getter(const_cast<R&>(r))); }};
    };
    auto bln = [](bool R::*m, const char* k) {
      return Field{k, [m](R& r, const std::string& v) { r.*m = parse_bool(v); },
                   [m](const R& r) { return std::string(r.*m ? "true" : "false"); }};
    };
    static const std::vector<Field> f = {
        str(&R::command, "command"),
        str(&R::preset, "preset"),
        str(&R::data_dir, "data_dir"),
        str(&R::eval_dir, "eval_dir"),
        str(&R::teacher, "teacher"),
        str(&R::checkpoint, "checkpoint"),
        str(&R::output, "output"),
        str(&R::resume, "resume"),
        dbl([](R& r) -> double& { return r.weights.lambda1; }, "lambda1"),
        dbl([](R& r) -> double& { return r.weights.lambda2; }, "lambda2"),
        dbl([](R& r) -> double& { return r.weights.lambda3; }, "lambda3"),
        dbl([](R& r) -> double& { return r.weights.lambda4; }, "lambda4"),
        dbl([](R& r) -> double& { return r.lambda_rd; }, "lambda_rd"),
        bln(&R::no1x1, "no1x1"),
        bln(&R::noKDM, "noKDM"),
        lng([](R& r) -> std::uint64_t& { return r.seed; }, "seed"),
        lng([](R& r) -> long& { return r.steps; }, "steps"),
        lng([](R& r) -> int& { return r.batch; }, "batch"),
        lng([](R& r) -> int& { return r.crop; }, "crop"),
        dbl([](R& r) -> double& { return r.lr_iem; }, "lr_iem"),
        dbl([](R& r) -> double& { return r.lr_em; }, "lr_em"),
        dbl([](R& r) -> double& { return r.lr_teacher; }, "lr_teacher"),
        dbl([](R& r) -> double& { return r.gamma; }, "gamma"),
        lng([](R& r) -> long& { return r.decay_start; }, "decay_start"),
        lng([](R& r) -> long& { return r.log_every; }, "log_every"),
        lng([](R& r) -> long& { return r.eval_every; }, "eval_every"),
        lng([](R& r) -> long& { return r.checkpoint_every; }, "checkpoint_every"),
        lng([](R& r) -> int& { return r.eval_images; }, "eval_images"),
        lng([](R& r) -> int& { return r.eval_crop; }, "eval_crop"),
        bln(&R::nq, "nq"),
        dbl([](R& r) -> double& { return r.sample_z; }, "sample_z"),
        dbl([](R& r) -> double& { return r.tail_mass; }, "tail_mass"),
        bln(&R::self_describing, "self_describing"),
    };
    return f;
  }
};

}  // namespace ilc
