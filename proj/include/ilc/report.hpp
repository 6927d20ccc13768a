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

// Evaluation harness: runs compress + decompress per image and mode, and
// emits the report as CSV, JSON lines and R-D plot data.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ilc/codec.hpp"
#include "ilc/data.hpp"
#include "ilc/metrics.hpp"
#include "ilc/models.hpp"

namespace ilc {

// A trained IEM or a teacher baseline, loaded from any checkpoint kind.
struct LoadedModel {
  std::variant<IemBundle, TeacherBundle> model;
  std::string path;
  std::string config;  // training provenance stored in the checkpoint

  static LoadedModel load(const std::string& path) {
    const Checkpoint ck = Checkpoint::load(path);
    LoadedModel m;
    m.path = path;
    m.config = ck.config;
    if (ck.kind == CheckpointKind::kTeacher) {
      m.model = TeacherBundle::from_checkpoint(ck);
    } else {
      m.model = IemBundle::from_checkpoint(ck);
    }
    return m;
  }

  [[nodiscard]] std::uint64_t fingerprint() const {
    return std::visit([](const auto& b) { return b.fingerprint(); }, model);
  }
  [[nodiscard]] std::string codec() const {
    return std::holds_alternative<IemBundle>(model) ? "iem" : "baseline";
  }
  [[nodiscard]] std::uint64_t config_hash() const { return fnv1a(config); }
  // Value of a key in the stored provenance, or empty.
  [[nodiscard]] std::string config_value(const std::string& key) const {
    std::istringstream is(config);
    std::string line;
    const std::string prefix = key + " = ";
    while (std::getline(is, line))
      if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
    return {};
  }
  [[nodiscard]] std::string ablation() const {
    std::string s;
    if (config_value("no1x1") == "true") s += "no1x1";
    if (config_value("noKDM") == "true") s += std::string(s.empty() ? "" : ",") + "noKDM";
    return s.empty() ? "none" : s;
  }
};

struct EvalRow {
  std::string image;
  std::string mode;  // "Q" or "NQ"
  int width = 0, height = 0;
  double bpp = 0;            // payload bits / source pixels
  double estimated_bpp = 0;  // rate-model estimate of the same latents
  double header_bits = 0;    // container bits outside the payload
  double psnr_rgb = 0, psnr_luma = 0, ms_ssim = 0;
  int ms_ssim_scales = 5;
};

struct EvalReport {
  std::string checkpoint, codec, ablation;
  std::uint64_t model_hash = 0, config_hash = 0;
  std::string config;
  std::vector<EvalRow> rows;  // per image, then one "mean" row per mode

  [[nodiscard]] const EvalRow* mean_row(const std::string& mode) const {
    for (const auto& r : rows)
      if (r.image == "mean" && r.mode == mode) return &r;
    return nullptr;
  }
};

struct EvalOptions {
  std::vector<std::string> modes{"Q"};
  double tail_mass = kDefaultTailMass;
  bool self_describing = true;
  double sample_z = 0.0;
  int threads = 0;  // 0: hardware concurrency
};

inline std::string format_point(double psnr_db, double bpp) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f dB @ %.4f bpp", psnr_db, bpp);
  return buf;
}

template <class B>
EvalRow evaluate_image(const B& model, const Image& img, const std::string& name,
                       const std::string& mode, const EvalOptions& o, std::uint64_t config_hash) {
  CompressOptions co;
  co.nq = mode == "NQ";
  co.tail_mass = o.tail_mass;
  co.self_describing = o.self_describing;
  co.config_hash = config_hash;
  const CompressResult r = compress(model, img, co);
  const Bytes file = r.stream.serialize();
  DecompressOptions dopt;
  dopt.sample_z = o.sample_z;
  const Image out = decompress(model, Bitstream::parse(file), dopt, o.tail_mass);
  EvalRow row;
  row.image = name;
  row.mode = mode;
  row.height = img.shape().h;
  row.width = img.shape().w;
  const double pixels = static_cast<double>(row.height) * row.width;
  row.bpp = bits_per_pixel(r.stream.payload.size(), row.height, row.width);
  row.estimated_bpp = r.estimated_bits / pixels;
  row.header_bits = 8.0 * static_cast<double>(file.size() - r.stream.payload.size());
  const auto a = to_metric_scale(to_model_scale(to_8bit(out)));
  const auto b = to_metric_scale(to_model_scale(img));
  row.psnr_rgb = psnr(a, b);
  row.psnr_luma = psnr(a, b, PsnrMode::kLuma);
  if (std::min(row.height, row.width) >= 11) {
    const MsSsimResult s = ms_ssim(a, b);
    row.ms_ssim = s.value;
    row.ms_ssim_scales = s.scales;
  } else {
    row.ms_ssim = 0;
    row.ms_ssim_scales = 0;
  }
  return row;
}

inline EvalRow mean_of(const std::vector<EvalRow>& rows, const std::string& mode) {
  EvalRow m;
  m.image = "mean";
  m.mode = mode;
  int n = 0;
  for (const auto& r : rows) {
    if (r.mode != mode) continue;
    ++n;
    m.bpp += r.bpp;
    m.estimated_bpp += r.estimated_bpp;
    m.header_bits += r.header_bits;
    m.psnr_rgb += r.psnr_rgb;
    m.psnr_luma += r.psnr_luma;
    m.ms_ssim += r.ms_ssim;
    m.ms_ssim_scales = std::min(m.ms_ssim_scales, r.ms_ssim_scales);
  }
  if (n > 0) {
    for (double* v : {&m.bpp, &m.estimated_bpp, &m.header_bits, &m.psnr_rgb, &m.psnr_luma,
                      &m.ms_ssim})
      *v /= n;
  }
  return m;
}

// Per-image pipelines run on parallel workers; each row lands at a fixed
// index so the report does not depend on scheduling.
inline EvalReport evaluate(const LoadedModel& lm, const Dataset& ds, const EvalOptions& o) {
  EvalReport rep;
  rep.checkpoint = lm.path;
  rep.codec = lm.codec();
  rep.ablation = lm.ablation();
  rep.model_hash = lm.fingerprint();
  rep.config_hash = lm.config_hash();
  rep.config = lm.config;
  const std::size_t jobs = ds.size() * o.modes.size();
  std::vector<EvalRow> rows(jobs);
  std::vector<std::string> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < jobs; k = next++) {
      const std::size_t i = k / o.modes.size();
      const std::string& mode = o.modes[k % o.modes.size()];
      try {
        rows[k] = std::visit(
            [&](const auto& b) {
              return evaluate_image(b, ds.images[i], ds.names[i], mode, o, rep.config_hash);
            },
            lm.model);
      } catch (const std::exception& e) {
        errors[k] = ds.names[i] + ": " + e.what();
      }
    }
  };
  int threads = o.threads > 0 ? o.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (!e.empty()) throw IoError("evaluation failed on " + e);
  rep.rows = std::move(rows);
  for (const auto& mode : o.modes) rep.rows.push_back(mean_of(rep.rows, mode));
  return rep;
}

inline const char* kReportCsvHeader =
    "checkpoint,codec,ablation,mode,image,width,height,bpp,estimated_bpp,header_bits,psnr_rgb,"
    "psnr_luma,ms_ssim_luma,ms_ssim_scales,model_hash,config_hash,code_version";

inline void write_report_csv(std::ostream& os, const std::vector<EvalReport>& reports) {
  os << kReportCsvHeader << '\n';
  char buf[512];
  for (const auto& rep : reports)
    for (const auto& r : rep.rows) {
      std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%s,%d,%d,%.6f,%.6f,%.0f,%.4f,%.4f,%.6f,%d,%s,%s,%u",
                    rep.checkpoint.c_str(), rep.codec.c_str(),
                    ("\"" + rep.ablation + "\"").c_str(), r.mode.c_str(), r.image.c_str(),
                    r.width, r.height, r.bpp, r.estimated_bpp, r.header_bits, r.psnr_rgb,
                    r.psnr_luma, r.ms_ssim, r.ms_ssim_scales, hex64(rep.model_hash).c_str(),
                    hex64(rep.config_hash).c_str(), kCodeVersion);
      os << buf << '\n';
    }
}

inline nlohmann::json row_json(const EvalReport& rep, const EvalRow& r) {
  return {{"checkpoint", rep.checkpoint}, {"codec", rep.codec},
          {"ablation", rep.ablation},     {"mode", r.mode},
          {"image", r.image},             {"width", r.width},
          {"height", r.height},           {"bpp", r.bpp},
          {"estimated_bpp", r.estimated_bpp}, {"header_bits", r.header_bits},
          {"psnr_rgb", r.psnr_rgb},       {"psnr_luma", r.psnr_luma},
          {"ms_ssim_luma", r.ms_ssim},    {"ms_ssim_scales", r.ms_ssim_scales},
          {"model_hash", hex64(rep.model_hash)}, {"config_hash", hex64(rep.config_hash)},
          {"code_version", kCodeVersion}};
}

// One provenance record per report followed by its rows.
inline void write_report_jsonl(std::ostream& os, const std::vector<EvalReport>& reports,
                               const std::string& eval_config) {
  for (const auto& rep : reports) {
    os << nlohmann::json{{"provenance",
                          {{"checkpoint", rep.checkpoint},
                           {"codec", rep.codec},
                           {"ablation", rep.ablation},
                           {"model_hash", hex64(rep.model_hash)},
                           {"config_hash", hex64(rep.config_hash)},
                           {"code_version", kCodeVersion},
                           {"training_config", rep.config},
                           {"eval_config", eval_config}}}}
              .dump()
       << '\n';
    for (const auto& r : rep.rows) os << row_json(rep, r).dump() << '\n';
  }
}

// Splits one CSV line, honouring double-quoted fields.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.emplace_back();
    } else {
      out.back() += ch;
    }
  }
  return out;
}

// (bpp, quality) pairs from the mean rows of report CSVs, one line per
// checkpoint and mode, ready for an external R-D plot.
inline void write_plot_data(std::ostream& os, const std::vector<std::string>& report_csvs) {
  os << "checkpoint,codec,ablation,mode,bpp,psnr_rgb,psnr_luma,ms_ssim_luma\n";
  for (const auto& path : report_csvs) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open report " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty report " + path);
    const auto header = split_csv(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* need : {"checkpoint", "codec", "ablation", "mode", "image", "bpp", "psnr_rgb",
                             "psnr_luma", "ms_ssim_luma"})
      if (!col.count(need)) throw IoError(path + " lacks column " + need);
    while (std::getline(in, line)) {
      const auto f = split_csv(line);
      if (f.size() != header.size()) throw IoError("malformed row in " + path);
      if (f[col["image"]] != "mean") continue;
      os << f[col["checkpoint"]] << ',' << f[col["codec"]] << ",\"" << f[col["ablation"]]
         << "\"," << f[col["mode"]] << ',' << f[col["bpp"]] << ',' << f[col["psnr_rgb"]] << ','
         << f[col["psnr_luma"]] << ',' << f[col["ms_ssim_luma"]] << '\n';
    }
  }
}

}  // namespace ilc
