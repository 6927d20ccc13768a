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

// Command-line front end: training, coding, evaluation and self-checks.
// Exit codes: 0 ok, 1 invariant or numeric failure, 2 usage or I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ilc/codec.hpp"
#include "ilc/config.hpp"
#include "ilc/data.hpp"
#include "ilc/report.hpp"
#include "ilc/selfcheck.hpp"
#include "ilc/train.hpp"

namespace {

using namespace ilc;

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitUsage = 2;

// Flags shared by the training and evaluation commands. Unset flags leave
// the config-file (or default) value alone.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<double> lambda[4];
  std::optional<double> lambda_rd;
  std::optional<long> steps;
  std::optional<int> batch, crop;
  std::optional<double> lr_iem, lr_em, lr_teacher;
  std::string ablate;
  std::vector<std::string> sets;  // raw key=value overrides

  void add_config(CLI::App* c) {
    c->add_option("--config", config, "key = value config file");
    c->add_option("--set", sets, "override any config key (key=value), repeatable");
  }
  void add_seed(CLI::App* c) { c->add_option("--seed", seed, "random seed"); }
  void add_preset(CLI::App* c) {
    c->add_option("--preset", preset, "model preset")->check(CLI::IsMember({"desk", "paper"}));
  }
  void add_training(CLI::App* c) {
    add_config(c);
    add_seed(c);
    add_preset(c);
    c->add_option("--steps", steps, "training steps");
    c->add_option("--batch", batch, "batch size");
    c->add_option("--crop", crop, "patch size");
  }

  RunConfig build(const std::string& command) const {
    RunConfig c;
    if (!config.empty()) c.load(config);
    c.command = command;
    if (preset) c.preset = *preset;
    if (seed) c.seed = *seed;
    double* w[4] = {&c.weights.lambda1, &c.weights.lambda2, &c.weights.lambda3, &c.weights.lambda4};
    for (int i = 0; i < 4; ++i)
      if (lambda[i]) *w[i] = *lambda[i];
    if (lambda_rd) c.lambda_rd = *lambda_rd;
    if (steps) c.steps = *steps;
    if (batch) c.batch = *batch;
    if (crop) c.crop = *crop;
    if (lr_iem) c.lr_iem = *lr_iem;
    if (lr_em) c.lr_em = *lr_em;
    if (lr_teacher) c.lr_teacher = *lr_teacher;
    if (!ablate.empty()) {
      std::stringstream ss(ablate);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item == "no1x1") {
          c.no1x1 = true;
        } else if (item == "noKDM") {
          c.noKDM = true;
        } else if (!item.empty() && item != "none") {
          throw ConfigError("unknown ablation '" + item + "' (expected no1x1, noKDM)");
        }
      }
    }
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
  }
};

void print_eval(const std::vector<EvalLog>& evals) {
  if (evals.empty()) return;
  const EvalLog& e = evals.back();
  std::cout << "final held-out eval: Q " << format_point(e.mean_q(), e.bpp_estimate) << ", NQ "
            << std::fixed << std::setprecision(2) << e.mean_nq() << " dB\n";
}

std::optional<Dataset> optional_dataset(const std::string& dir) {
  if (dir.empty()) return std::nullopt;
  return load_dataset(dir);
}

int cmd_train_teacher(const CommonFlags& f) {
  const RunConfig c = f.build("train-teacher");
  if (c.data_dir.empty()) throw ConfigError("train-teacher needs --data");
  if (c.output.empty()) throw ConfigError("train-teacher needs --output");
  const Dataset data = load_dataset(c.data_dir);
  const auto held = optional_dataset(c.eval_dir);
  const auto r = train_teacher(c, data, held ? &*held : nullptr);
  std::cout << "teacher trained for " << c.steps << " steps (" << r.skipped
            << " skipped); checkpoint " << (std::filesystem::path(c.output) / "teacher.ckpt").string()
            << "\n";
  print_eval(r.evals);
  return kExitOk;
}

int cmd_train(const CommonFlags& f) {
  const RunConfig c = f.build("train");
  if (c.data_dir.empty()) throw ConfigError("train needs --data");
  if (c.output.empty()) throw ConfigError("train needs --output");
  const Dataset data = load_dataset(c.data_dir);
  const auto held = optional_dataset(c.eval_dir);
  std::optional<TeacherBundle> teacher;
  if (!c.teacher.empty()) teacher = TeacherBundle::from_checkpoint(Checkpoint::load(c.teacher));
  const auto r = train_iem(c, data, teacher ? &*teacher : nullptr, held ? &*held : nullptr);
  std::cout << "IEM trained for " << c.steps << " steps (" << r.skipped << " skipped, ablation "
            << c.ablation_tag() << "); checkpoint "
            << (std::filesystem::path(c.output) / "iem.ckpt").string() << "\n";
  print_eval(r.evals);
  return kExitOk;
}

int cmd_compress(const std::string& input, const std::string& ckpt, const std::string& output,
                 bool nq, bool no_tables, double tail_mass) {
  const LoadedModel m = LoadedModel::load(ckpt);
  const Image img = read_png(input);
  CompressOptions o;
  o.nq = nq;
  o.self_describing = !no_tables;
  o.tail_mass = tail_mass;
  o.config_hash = m.config_hash();
  const CompressResult r =
      std::visit([&](const auto& b) { return compress(b, img, o); }, m.model);
  const Bytes file = r.stream.serialize();
  write_file(output, file);
  const int h = img.shape().h, w = img.shape().w;
  const Image back = std::visit(
      [&](const auto& b) { return decompress(b, Bitstream::parse(file), {}, tail_mass); },
      m.model);
  const double quality = psnr(to_metric_scale(to_model_scale(to_8bit(back))),
                              to_metric_scale(to_model_scale(img)));
  std::cout << output << ": " << file.size() << " bytes, " << (nq ? "NQ" : "Q") << " "
            << format_point(quality, bits_per_pixel(r.stream.payload.size(), h, w))
            << " (rate-model estimate " << std::fixed << std::setprecision(4)
            << r.estimated_bits / (static_cast<double>(h) * w) << " bpp)\n";
  return kExitOk;
}

int cmd_decompress(const std::string& input, const std::string& ckpt, const std::string& output,
                   double sample_z, std::uint64_t seed, double tail_mass) {
  const LoadedModel m = LoadedModel::load(ckpt);
  const Bitstream bs = Bitstream::parse(read_file(input));
  DecompressOptions o;
  o.sample_z = sample_z;
  o.seed = seed;
  const Image out =
      std::visit([&](const auto& b) { return decompress(b, bs, o, tail_mass); }, m.model);
  write_png(output, out);
  std::cout << output << ": " << bs.header.width << "x" << bs.header.height << "\n";
  return kExitOk;
}

int cmd_eval(const std::vector<std::string>& ckpts, const std::string& data_dir,
             const std::string& prefix, bool nq, double sample_z, double tail_mass, int threads) {
  if (ckpts.empty()) throw ConfigError("eval needs at least one --checkpoint");
  const Dataset ds = load_dataset(data_dir);
  EvalOptions o;
  o.modes = nq ? std::vector<std::string>{"Q", "NQ"} : std::vector<std::string>{"Q"};
  o.sample_z = sample_z;
  o.tail_mass = tail_mass;
  o.threads = threads;
  std::vector<EvalReport> reports;
  for (const auto& path : ckpts) {
    reports.push_back(evaluate(LoadedModel::load(path), ds, o));
    for (const auto& mode : o.modes) {
      const EvalRow* r = reports.back().mean_row(mode);
      std::cout << path << " [" << reports.back().codec << ", ablation "
                << reports.back().ablation << "] " << mode << " mean over " << ds.size()
                << " images: " << format_point(r->psnr_rgb, r->bpp) << ", luma "
                << std::fixed << std::setprecision(2) << r->psnr_luma << " dB, MS-SSIM "
                << std::setprecision(4) << r->ms_ssim << "\n";
    }
  }
  std::ostringstream eval_cfg;
  eval_cfg << "data_dir = " << data_dir << "\nmodes = " << (nq ? "Q,NQ" : "Q")
           << "\nsample_z = " << sample_z << "\ntail_mass = " << tail_mass << "\n";
  const std::filesystem::path base(prefix);
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  {
    std::ofstream csv(prefix + ".csv");
    write_report_csv(csv, reports);
    std::ofstream jl(prefix + ".jsonl");
    write_report_jsonl(jl, reports, eval_cfg.str());
  }
  std::ofstream plot(prefix + "_plot.csv");
  write_plot_data(plot, {prefix + ".csv"});
  std::cout << "report: " << prefix << ".csv, " << prefix << ".jsonl, " << prefix
            << "_plot.csv\n";
  return kExitOk;
}

int cmd_check(const std::vector<std::string>& suites) {
  for (const auto& s : suites) {
    bool known = false;
    for (const auto& [name, fn] : check_suites()) known = known || name == s;
    if (!known) throw ConfigError("unknown check suite '" + s + "'");
  }
  bool all = true;
  for (const auto& r : run_checks(suites)) {
    std::printf("%-10s %s  (%.2f s)  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.seconds,
                r.detail.c_str());
    all = all && r.passed;
  }
  return all ? kExitOk : kExitInvariant;
}

int cmd_plot_data(const std::vector<std::string>& reports, const std::string& output) {
  if (output.empty()) {
    write_plot_data(std::cout, reports);
  } else {
    std::ofstream os(output);
    if (!os) throw IoError("cannot write " + output);
    write_plot_data(os, reports);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned image codec with an invertible encoding module"};
  app.require_subcommand(1);
  CommonFlags f;

  std::string data, eval_data, output, teacher, resume;
  auto bind_paths = [&](CLI::App* c, bool with_teacher) {
    c->add_option("--data", data, "directory of training PNGs");
    c->add_option("--eval-data", eval_data, "directory of held-out PNGs");
    c->add_option("--output", output, "output directory");
    c->add_option("--resume", resume, "resume from a training checkpoint");
    if (with_teacher) c->add_option("--teacher", teacher, "teacher checkpoint");
  };

  auto* tt = app.add_subcommand("train-teacher", "train the baseline teacher codec");
  f.add_training(tt);
  bind_paths(tt, false);
  tt->add_option("--lambda-rd", f.lambda_rd, "distortion weight of the teacher objective");
  tt->add_option("--lr", f.lr_teacher, "teacher learning rate");

  auto* tr = app.add_subcommand("train", "train the IEM codec");
  f.add_training(tr);
  bind_paths(tr, true);
  for (int i = 0; i < 4; ++i) {
    tr->add_option("--lambda" + std::to_string(i + 1), f.lambda[i],
                   std::string("loss weight ") + std::to_string(i + 1));
  }
  tr->add_option("--ablate", f.ablate, "comma list of no1x1, noKDM");
  tr->add_option("--lr-iem", f.lr_iem, "IEM learning rate");
  tr->add_option("--lr-em", f.lr_em, "entropy model learning rate");

  std::string input, ckpt;
  bool nq = false, no_tables = false;
  double sample_z = 0.0, tail_mass = kDefaultTailMass;
  std::uint64_t z_seed = 0;
  auto* cp = app.add_subcommand("compress", "encode a PNG into an .ilc file");
  cp->add_option("input", input, "input PNG")->required();
  cp->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  cp->add_option("-o,--output", output, "output .ilc file")->required();
  cp->add_flag("--nq", nq, "store the unquantized latent (debug)");
  cp->add_flag("--no-tables", no_tables, "omit coder tables; decoder rebuilds them");
  cp->add_option("--tail-mass", tail_mass, "coder table tail mass");

  auto* dp = app.add_subcommand("decompress", "decode an .ilc file into a PNG");
  dp->add_option("input", input, "input .ilc file")->required();
  dp->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  dp->add_option("-o,--output", output, "output PNG")->required();
  dp->add_option("--sample-z", sample_z, "draw z ~ N(0, sigma^2) instead of z = 0")
      ->check(CLI::NonNegativeNumber);
  dp->add_option("--seed", z_seed, "seed for --sample-z");
  dp->add_option("--tail-mass", tail_mass, "coder table tail mass");

  std::vector<std::string> ckpts;
  int threads = 0;
  auto* ev = app.add_subcommand("eval", "rate-distortion evaluation over an image directory");
  ev->add_option("--checkpoint", ckpts, "checkpoint(s) to evaluate")->required();
  ev->add_option("--data", data, "directory of evaluation PNGs")->required();
  ev->add_option("-o,--output", output, "report path prefix")->required();
  ev->add_flag("--nq", nq, "also evaluate without quantization");
  ev->add_option("--sample-z", sample_z, "decode with sampled z")->check(CLI::NonNegativeNumber);
  ev->add_option("--tail-mass", tail_mass, "coder table tail mass");
  ev->add_option("--threads", threads, "worker threads (0: all cores)");

  std::vector<std::string> suites;
  auto* ck = app.add_subcommand("check", "run the invariant self-check suites");
  ck->add_option("--suite", suites, "run only these suites");

  std::vector<std::string> report_files;
  auto* pd = app.add_subcommand("plot-data", "emit (bpp, quality) pairs from report CSVs");
  pd->add_option("reports", report_files, "report CSV files")->required();
  pd->add_option("-o,--output", output, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  auto apply_paths = [&]() {
    if (!data.empty()) f.sets.push_back("data_dir=" + data);
    if (!eval_data.empty()) f.sets.push_back("eval_dir=" + eval_data);
    if (!output.empty()) f.sets.push_back("output=" + output);
    if (!teacher.empty()) f.sets.push_back("teacher=" + teacher);
    if (!resume.empty()) f.sets.push_back("resume=" + resume);
  };
  try {
    if (*tt) {
      apply_paths();
      return cmd_train_teacher(f);
    }
    if (*tr) {
      apply_paths();
      return cmd_train(f);
    }
    if (*cp) return cmd_compress(input, ckpt, output, nq, no_tables, tail_mass);
    if (*dp) return cmd_decompress(input, ckpt, output, sample_z, z_seed, tail_mass);
    if (*ev) return cmd_eval(ckpts, data, output, nq, sample_z, tail_mass, threads);
    if (*ck) return cmd_check(suites);
    if (*pd) return cmd_plot_data(report_files, output);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const InvertibilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
