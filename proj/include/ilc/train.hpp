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

// Training loops for the teacher and for the IEM, with CSV logging,
// held-out evaluation, checkpointing and exact resume.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ilc/codec.hpp"
#include "ilc/config.hpp"
#include "ilc/data.hpp"
#include "ilc/metrics.hpp"
#include "ilc/models.hpp"
#include "ilc/optim.hpp"

namespace ilc {

inline constexpr int kMaxConsecutiveSkips = 50;

struct StepLog {
  long step = 0;
  double total = 0, distortion = 0, rate = 0, distribution = 0, distillation = 0;
  double lr_main = 0, lr_prior = 0;
  long skipped = 0;
};

struct EvalLog {
  long step = 0;
  std::vector<double> psnr_q, psnr_nq;  // per held-out image
  double bpp_estimate = 0;              // mean rate-model bpp of the quantized latents
  [[nodiscard]] double mean_q() const { return mean(psnr_q); }
  [[nodiscard]] double mean_nq() const { return mean(psnr_nq); }
  static double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
};

inline const char* kStepCsvHeader =
    "step,total,distortion,rate_bpp,distribution,distillation,lr_main,lr_prior,skipped,"
    "config_hash,code_version";

inline std::string csv_row(const StepLog& s, std::uint64_t config_hash) {
  std::ostringstream os;
  os << std::setprecision(9) << s.step << ',' << s.total << ',' << s.distortion << ',' << s.rate
     << ',' << s.distribution << ',' << s.distillation << ',' << s.lr_main << ',' << s.lr_prior
     << ',' << s.skipped << ',' << hex64(config_hash) << ',' << kCodeVersion;
  return os.str();
}

// Held-out crops: the centred eval_crop square of the first n images,
// shrunk to a stride multiple when an image is smaller.
inline std::vector<Image> heldout_crops(const Dataset& ds, int n, int eval_crop, int stride) {
  std::vector<Image> out;
  for (std::size_t i = 0; i < ds.size() && static_cast<int>(out.size()) < n; ++i) {
    const Image& im = ds.images[i];
    const int side = std::min({eval_crop, im.shape().h, im.shape().w}) / stride * stride;
    if (side < stride) continue;
    const int top = (im.shape().h - side) / 2, left = (im.shape().w - side) / 2;
    out.push_back(rescaled_window(im, 1.0, top, left, side, side));
  }
  return out;
}

// PSNR with quantized (Q) and unquantized (NQ) latents, z = 0 in both.
inline EvalLog evaluate_iem(const IemBundle& m, const std::vector<Image>& images, long step) {
  EvalLog e;
  e.step = step;
  double bits = 0, pixels = 0;
  for (const Image& im : images) {
    const Tensor<float> x = to_model_scale(im);
    const Tensor<float> y = m.encode_latent(x);
    const Tensor<float> z(m.z_shape(y.shape()));
    const Tensor<float> y_hat = quantize(y);
    const auto ref = x.cast<double>();
    e.psnr_q.push_back(psnr(to_metric_scale(m.decode_latent(y_hat, z)), ref));
    e.psnr_nq.push_back(psnr(to_metric_scale(m.decode_latent(y, z)), ref));
    Tape<float> t(false);
    const auto p = m.prior.likelihood(t, t.constant(y_hat)).value();
    for (float v : p.span()) bits -= std::log2(static_cast<double>(v));
    pixels += static_cast<double>(im.shape().h) * im.shape().w;
  }
  e.bpp_estimate = pixels > 0 ? bits / pixels : 0.0;
  return e;
}

inline EvalLog evaluate_teacher(const TeacherBundle& m, const std::vector<Image>& images,
                                long step) {
  EvalLog e;
  e.step = step;
  double bits = 0, pixels = 0;
  for (const Image& im : images) {
    const Tensor<float> x = to_model_scale(im);
    const Tensor<float> y = m.encode_latent(x);
    const Tensor<float> y_hat = quantize(y);
    const auto ref = x.cast<double>();
    e.psnr_q.push_back(psnr(to_metric_scale(m.decode_latent(y_hat)), ref));
    e.psnr_nq.push_back(psnr(to_metric_scale(m.decode_latent(y)), ref));
    Tape<float> t(false);
    const auto p = m.net.prior.likelihood(t, t.constant(y_hat)).value();
    for (float v : p.span()) bits -= std::log2(static_cast<double>(v));
    pixels += static_cast<double>(im.shape().h) * im.shape().w;
  }
  e.bpp_estimate = pixels > 0 ? bits / pixels : 0.0;
  return e;
}

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EvalLog&)> on_eval;
  bool quiet = false;
};

template <class Bundle>
struct TrainResult {
  Bundle model;
  std::vector<StepLog> steps;
  std::vector<EvalLog> evals;
  long skipped = 0;
};

namespace detail {

// Shared loop skeleton. `loss_step` builds the loss for one batch on the
// given tape and returns the component breakdown; the skeleton handles
// optimization, skip accounting, logging, evaluation and checkpoints.
template <class Bundle>
struct LoopSpec {
  std::string name;  // file stem for checkpoints and the CSV log
  std::vector<ParamStore<float>*> stores;
  std::function<std::vector<double>(long)> lrs;
  std::function<LossTerms<float>(Tape<float>&, const Tensor<float>&, Rng&)> loss_step;
  std::function<EvalLog(long)> evaluate;
  std::function<Checkpoint()> checkpoint;
  std::function<void()> validate;  // throws if the updated parameters are unusable
};

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
  return dir;
}

template <class Bundle>
void run_loop(const RunConfig& cfg, const Dataset& data, LoopSpec<Bundle>& spec,
              TrainResult<Bundle>& res, const TrainHooks& hooks) {
  Rng data_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
  Rng noise_rng(cfg.seed * 0xC2B2AE3D27D4EB4FULL + 2);
  Adam<float> adam;
  long start = 0;
  double best = std::numeric_limits<double>::infinity();
  if (!cfg.resume.empty()) {
    const Checkpoint ck = Checkpoint::load(cfg.resume);
    if (!ck.state) throw ConfigError("resume checkpoint carries no training state");
    const Checkpoint fresh = spec.checkpoint();
    if (ck.arch != fresh.arch) throw ConfigError("resume checkpoint architecture differs");
    for (auto* s : spec.stores) {
      const std::string prefix = s->group() == kIemGroup           ? "iem/"
                                 : s->group() == kTeacherGroup     ? "teacher/"
                                                                   : "prior/";
      ck.load_store(prefix, *s);
    }
    ByteReader r(ck.state->optimizer);
    adam.read(r);
    data_rng.set_state(ck.state->data_rng);
    noise_rng.set_state(ck.state->noise_rng);
    start = ck.state->step;
    best = ck.state->best_loss;
  }
  const bool write = !cfg.output.empty();
  std::ofstream csv;
  if (write) {
    ensure_dir(cfg.output);
    const auto path = std::filesystem::path(cfg.output) / (spec.name + "_log.csv");
    if (start > 0 && std::filesystem::exists(path)) {
      // Keep rows up to the resume point so the log matches an uninterrupted run.
      std::ifstream in(path);
      std::vector<std::string> keep;
      std::string line;
      while (std::getline(in, line)) {
        if (keep.empty()) {
          keep.push_back(line);
          continue;
        }
        if (std::stol(line.substr(0, line.find(','))) > start) break;
        keep.push_back(line);
      }
      in.close();
      csv.open(path, std::ios::trunc);
      for (const auto& l : keep) csv << l << '\n';
    } else {
      csv.open(path, std::ios::trunc);
      csv << kStepCsvHeader << '\n';
    }
  }
  auto save = [&](long step) {
    if (!write) return;
    Checkpoint ck = spec.checkpoint();
    TrainState st;
    st.step = step;
    st.best_loss = best;
    st.data_rng = data_rng.state();
    st.noise_rng = noise_rng.state();
    ByteWriter w(st.optimizer);
    adam.write(w);
    ck.state = std::move(st);
    const auto dir = std::filesystem::path(cfg.output);
    ck.save(dir / (spec.name + ".ckpt"));
    ck.save(dir / (spec.name + "_step" + std::to_string(step) + ".ckpt"));
  };
  auto eval = [&](long step) {
    if (!spec.evaluate) return;
    EvalLog e = spec.evaluate(step);
    if (hooks.on_eval) hooks.on_eval(e);
    if (!hooks.quiet) {
      std::cerr << spec.name << " step " << step << ": eval PSNR Q " << std::fixed
                << std::setprecision(2) << e.mean_q() << " dB, NQ " << e.mean_nq()
                << " dB, est. " << std::setprecision(4) << e.bpp_estimate << " bpp\n";
    }
    res.evals.push_back(std::move(e));
  };
  int consecutive = 0;
  for (long step = start + 1; step <= cfg.steps; ++step) {
    const Tensor<float> x = to_model_scale(sample_batch(data, cfg.batch, cfg.crop, data_rng));
    const std::vector<double> lrs = spec.lrs(step);
    StepLog log;
    log.step = step;
    log.lr_main = lrs.at(0);
    log.lr_prior = lrs.size() > 1 ? lrs[1] : lrs[0];
    bool ok = false;
    std::string why;
    std::vector<Tensor<float>> snapshot;
    try {
      Tape<float> tape;
      const LossTerms<float> terms = spec.loss_step(tape, x, noise_rng);
      log.total = terms.value(terms.total);
      log.distortion = terms.value(terms.distortion);
      log.rate = terms.value(terms.rate);
      log.distribution = terms.value(terms.distribution);
      log.distillation = terms.value(terms.distillation);
      why = terms.non_finite();
      if (why.empty()) {
        const GradMap<float> grads = tape.backward(terms.total);
        for (auto* s : spec.stores)
          for (const auto& p : *s) snapshot.push_back(p.value);
        ok = adam.step(spec.stores, lrs, grads);
        if (!ok) why = "non-finite gradient";
        if (ok && spec.validate) spec.validate();
      }
    } catch (const InvertibilityError& e) {
      ok = false;
      why = e.what();
      if (!snapshot.empty()) {
        std::size_t k = 0;
        for (auto* s : spec.stores)
          for (int i = 0; i < s->size(); ++i) s->set(i, snapshot[k++]);
      }
    } catch (const NumericError& e) {
      ok = false;
      why = e.what();
    }
    if (!ok) {
      ++res.skipped;
      if (!hooks.quiet) std::cerr << spec.name << " step " << step << " skipped: " << why << "\n";
      if (++consecutive >= kMaxConsecutiveSkips) {
        save(step - 1);
        throw NumericError(spec.name + " diverged at step " + std::to_string(step) + " (" + why +
                           "); last good state saved");
      }
    } else {
      consecutive = 0;
      best = std::min(best, log.total);
    }
    log.skipped = res.skipped;
    if (csv.is_open() && (step % cfg.log_every == 0 || step == cfg.steps)) {
      csv << csv_row(log, cfg.hash()) << '\n';
    }
    if (!hooks.quiet && (step % 100 == 0 || step == start + 1)) {
      std::cerr << spec.name << " step " << step << ": total " << std::setprecision(6)
                << log.total << " dist " << log.distortion << " rate " << log.rate << " distr "
                << log.distribution << " kd " << log.distillation << "\n";
    }
    if (hooks.on_step) hooks.on_step(log);
    res.steps.push_back(log);
    if (cfg.eval_every > 0 && step % cfg.eval_every == 0) eval(step);
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) save(step);
  }
  if (cfg.steps > start) {
    if (cfg.eval_every <= 0 || cfg.steps % cfg.eval_every != 0) eval(cfg.steps);
    if (cfg.checkpoint_every <= 0 || cfg.steps % cfg.checkpoint_every != 0) save(cfg.steps);
  }
}

}  // namespace detail

// Rate + lambda_rd * distortion with the uniform-noise proxy on the latent.
inline TrainResult<TeacherBundle> train_teacher(const RunConfig& cfg, const Dataset& data,
                                                const Dataset* heldout = nullptr,
                                                const TrainHooks& hooks = {}) {
  cfg.validate();
  TrainResult<TeacherBundle> res{
      TeacherBundle{TeacherModel<float>::create(cfg.teacher_config(), cfg.seed)}, {}, {}, 0};
  TeacherBundle& m = res.model;
  std::vector<Image> eval_set;
  if (heldout) eval_set = heldout_crops(*heldout, cfg.eval_images, cfg.eval_crop, m.stride());
  detail::LoopSpec<TeacherBundle> spec;
  spec.name = "teacher";
  spec.stores = {&m.net.params, &m.net.prior.params};
  spec.lrs = [&](long step) {
    const double lr = cfg.teacher_schedule().at(step);
    return std::vector<double>{lr, lr};
  };
  spec.loss_step = [&](Tape<float>& tape, const Tensor<float>& x, Rng& noise) {
    LossTerms<float> t;
    const Var<float> xv = tape.constant(x);
    const Var<float> y = m.net.encode(tape, xv);
    const Var<float> y_noisy =
        add(y, tape.constant(noise.uniform_tensor<float>(y.shape(), -0.5, 0.5)));
    const double pixels = static_cast<double>(x.shape().n) * x.shape().h * x.shape().w;
    const Var<float> bits = bits_from_likelihood(m.net.prior.likelihood(tape, y_noisy));
    t.rate = scale(bits, static_cast<float>(1.0 / pixels));
    t.bits = bits.value().item();
    t.distortion = distortion_loss(m.net.decode(tape, y_noisy), xv);
    t.total = add(t.rate, scale(t.distortion, static_cast<float>(cfg.lambda_rd)));
    return t;
  };
  if (!eval_set.empty()) {
    spec.evaluate = [&](long step) { return evaluate_teacher(m, eval_set, step); };
  }
  const std::string prov = cfg.artifact_provenance();
  spec.checkpoint = [&]() { return m.to_checkpoint(prov); };
  detail::run_loop(cfg, data, spec, res, hooks);
  return res;
}

// Initializes the IEM prior from the teacher's when the shapes agree.
inline bool init_prior_from_teacher(IemBundle& m, const TeacherBundle& t) {
  const auto& tp = t.net.prior;
  if (tp.channels != m.prior.channels || tp.dims != m.prior.dims) return false;
  for (int i = 0; i < m.prior.params.size(); ++i) m.prior.params.set(i, tp.params.value(i));
  return true;
}

inline void check_distillation_shapes(const IemConfig& iem, const TeacherConfig& t) {
  if (iem.stride() != t.stride() || iem.y_channels() != t.filters) {
    throw ConfigError("teacher latent (stride " + std::to_string(t.stride()) + ", " +
                      std::to_string(t.filters) + " channels) does not match the IEM coding " +
                      "target (stride " + std::to_string(iem.stride()) + ", " +
                      std::to_string(iem.y_channels()) + " channels)");
  }
}

inline TrainResult<IemBundle> train_iem(const RunConfig& cfg, const Dataset& data,
                                        const TeacherBundle* teacher,
                                        const Dataset* heldout = nullptr,
                                        const TrainHooks& hooks = {},
                                        const IemBundle* init = nullptr) {
  cfg.validate();
  const IemConfig icfg = cfg.iem_config();
  TrainResult<IemBundle> res{init ? *init : IemBundle::create(icfg, cfg.seed), {}, {}, 0};
  IemBundle& m = res.model;
  m.iem.reset_caches();
  const bool distill = !cfg.noKDM && cfg.weights.lambda4 > 0;
  if (distill && !teacher) throw ConfigError("distillation needs a teacher checkpoint");
  if (teacher) {
    check_distillation_shapes(icfg, teacher->net.config);
    if (!init && !init_prior_from_teacher(m, *teacher) && !hooks.quiet) {
      std::cerr << "teacher prior shape differs; IEM prior starts fresh\n";
    }
  }
  std::vector<Image> eval_set;
  if (heldout) eval_set = heldout_crops(*heldout, cfg.eval_images, cfg.eval_crop, m.stride());
  detail::LoopSpec<IemBundle> spec;
  spec.name = "iem";
  spec.stores = {&m.iem.params, &m.prior.params};
  spec.lrs = [&](long step) {
    return std::vector<double>{cfg.iem_schedule().at(step), cfg.em_schedule().at(step)};
  };
  spec.loss_step = [&](Tape<float>& tape, const Tensor<float>& x, Rng& noise) {
    std::optional<Tensor<float>> ty;
    if (distill) ty = teacher->encode_latent(x);
    return total_loss(tape, m.iem, m.prior, tape.constant(x), ty, cfg.weights, noise);
  };
  spec.validate = [&]() {
    for (std::size_t l = 0; l < m.iem.levels.size(); ++l)
      if (m.iem.levels[l].mix >= 0) (void)m.iem.cached_inverse(l);
  };
  if (!eval_set.empty()) spec.evaluate = [&](long step) { return evaluate_iem(m, eval_set, step); };
  const std::string prov = cfg.artifact_provenance();
  spec.checkpoint = [&]() { return m.to_checkpoint(prov); };
  detail::run_loop(cfg, data, spec, res, hooks);
  return res;
}

}  // namespace ilc
