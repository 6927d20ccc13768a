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

// Image <-> .ilc pipelines for any model bundle (IEM or teacher).

#pragma once

#include <cmath>

#include "ilc/bitstream.hpp"
#include "ilc/image_io.hpp"
#include "ilc/models.hpp"
#include "ilc/range_coder.hpp"

namespace ilc {

inline Tensor<float> to_model_scale(const Image& x) {
  return x.map([](float v) { return v * static_cast<float>(kPixelScale); });
}

inline Tensor<double> to_metric_scale(const Tensor<float>& x255) {
  return x255.map([](float v) { return std::min(255.0f, std::max(0.0f, v)); }).cast<double>();
}

struct CompressOptions {
  bool nq = false;              // store y unquantized as raw float32
  bool self_describing = true;  // embed coder tables in the stream
  double tail_mass = kDefaultTailMass;
  std::uint64_t config_hash = 0;
};

struct CompressResult {
  Bitstream stream;
  double estimated_bits = 0;  // -sum log2 p(y_hat) under the prior (Q mode)
};

struct DecompressOptions {
  double sample_z = 0.0;  // 0 decodes with the mode z = 0
  std::uint64_t seed = 0;
};

template <class B>
CdfTable tables_for(const B& model, double tail_mass) {
  return build_cdf_tables(model.prior_model(), tail_mass);
}

// img: (1, H, W, 3) in [0, 1].
template <class B>
CompressResult compress(const B& model, const Image& img, const CompressOptions& o = {}) {
  const Shape s = img.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("compress expects one RGB image, got " + s.str());
  const Image padded = pad_to_multiple(img, model.stride());
  const Tensor<float> y =
      model.encode_latent(padded.map([](float v) { return v * static_cast<float>(kPixelScale); }));
  CompressResult r;
  StreamHeader& h = r.stream.header;
  h.height = static_cast<std::uint32_t>(s.h);
  h.width = static_cast<std::uint32_t>(s.w);
  h.padded_height = static_cast<std::uint32_t>(padded.shape().h);
  h.padded_width = static_cast<std::uint32_t>(padded.shape().w);
  h.model_hash = model.fingerprint();
  h.config_hash = o.config_hash;
  h.latent = y.shape();
  if (o.nq) {
    h.flags = kNoQuantization;
    ByteWriter w(r.stream.payload);
    for (float v : y.span()) w.put_f32(v);
    r.estimated_bits = 32.0 * static_cast<double>(y.numel());
    return r;
  }
  const Tensor<float> y_hat = quantize(y);
  Tensor<std::int32_t> sym(y.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) {
    const float v = y_hat[i];
    if (!(std::abs(v) < 2.1e9f)) throw NumericError("latent value out of the 32-bit symbol range");
    sym[i] = static_cast<std::int32_t>(v);
  }
  CdfTable tables = tables_for(model, o.tail_mass);
  r.stream.payload = encode_symbols(sym, tables);
  if (o.self_describing) {
    h.flags = kSelfDescribing;
    r.stream.tables = std::move(tables);
  }
  Tape<float> t(false);
  const auto p = model.prior_model().likelihood(t, t.constant(y_hat)).value();
  for (float v : p.span()) r.estimated_bits -= std::log2(static_cast<double>(v));
  return r;
}

// Latent values of a parsed stream (dequantized symbols or raw NQ floats).
template <class B>
Tensor<float> stream_latent(const B& model, const Bitstream& bs, double tail_mass) {
  const StreamHeader& h = bs.header;
  if (h.model_hash != model.fingerprint()) {
    throw HashMismatch("stream was produced by model " + hex64(h.model_hash) +
                       ", checkpoint is " + hex64(model.fingerprint()));
  }
  Tensor<float> y(h.latent);
  if (h.has(kNoQuantization)) {
    if (bs.payload.size() != 4 * y.numel()) throw CorruptStream("NQ payload size mismatch");
    ByteReader r(bs.payload);
    for (auto& v : y.span()) v = r.get_f32();
    return y;
  }
  const CdfTable tables = bs.tables ? *bs.tables : tables_for(model, tail_mass);
  const auto sym = decode_symbols(bs.payload, tables, h.latent);
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = static_cast<float>(sym[i]);
  return y;
}

// Returns the reconstruction in [0, 1], cropped to the source dims.
template <class B>
Image decompress(const B& model, const Bitstream& bs, const DecompressOptions& o = {},
                 double tail_mass = kDefaultTailMass) {
  const Tensor<float> y = stream_latent(model, bs, tail_mass);
  Tensor<float> x;
  if constexpr (requires { model.z_shape(y.shape()); }) {
    Tensor<float> z(model.z_shape(y.shape()));
    if (o.sample_z > 0) {
      Rng rng(o.seed);
      z = rng.normal_tensor<float>(z.shape(), o.sample_z);
    }
    x = model.decode_latent(y, z);
  } else {
    x = model.decode_latent(y);
  }
  const Image full = x.map([](float v) {
    return std::min(1.0f, std::max(0.0f, v / static_cast<float>(kPixelScale)));
  });
  return crop(full, static_cast<int>(bs.header.height), static_cast<int>(bs.header.width));
}

}  // namespace ilc
