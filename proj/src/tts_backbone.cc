// Copyright 2026 The s2p Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "s2p/tts_backbone.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "s2p/checkpoint.h"
#include "s2p/config.h"
#include "s2p/errors.h"
#include "s2p/rng.h"

namespace s2p::tts {

using ag::Index;
using ag::Matrix;

namespace {

Var mask_column(const std::vector<bool>& mask) {
  ag::Matrix m(static_cast<Index>(mask.size()), 1);
  for (std::size_t i = 0; i < mask.size(); ++i) m(static_cast<Index>(i), 0) = mask[i] ? 1.0 : 0.0;
  return ag::constant(std::move(m));
}

bool all_valid(const std::vector<bool>& mask) {
  for (bool v : mask) {
    if (!v) return false;
  }
  return true;
}

}  // namespace

void BackboneConfig::validate() const {
  if (vocab_size < 1 || width < 1 || heads < 1 || ffn_hidden < 1 ||
      conv_kernel < 1 || encoder_blocks < 0 || decoder_blocks < 0 ||
      variance_hidden < 1 || embed_bins < 2 || mel_bins < 1 || n_speakers < 1) {
    throw ConfigError("backbone: sizes must be positive");
  }
  if (width % heads != 0) throw ConfigError("backbone: width must divide by heads");
}

int PhonemeLatents::valid_length() const {
  int n = 0;
  for (bool v : mask) n += v ? 1 : 0;
  return n;
}

PhonemeLatents pad_latents(const PhonemeLatents& latents, int length) {
  if (length < latents.length()) {
    throw ContractViolation("pad_latents: target shorter than input");
  }
  PhonemeLatents out;
  out.values = ag::pad_rows(latents.values, length);
  out.mask = latents.mask;
  out.mask.resize(static_cast<std::size_t>(length), false);
  return out;
}

ContourVars squash(const VarianceOutput& v) {
  ContourVars c;
  c.pitch = ag::sigmoid(v.pitch_logit);
  c.energy = ag::sigmoid(v.energy_logit);
  c.log_duration = v.log_duration;
  c.mask = v.mask;
  if (!all_valid(v.mask)) {
    const Var m = mask_column(v.mask);
    c.pitch = ag::mul(c.pitch, m);
    c.energy = ag::mul(c.energy, m);
    c.log_duration = ag::mul(c.log_duration, m);
  }
  return c;
}

std::vector<int> durations_from(const Var& log_duration,
                                const std::vector<bool>& mask, int* clamped) {
  std::vector<int> d(mask.size(), 0);
  int n_clamped = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double x = log_duration.value()(static_cast<Index>(i), 0);
    const double raw = std::floor(std::exp(x) + 0.5);
    if (!(raw >= 1.0 && raw <= kMaxPhonemeFrames)) ++n_clamped;
    d[i] = duration_from_log(x);
  }
  if (clamped != nullptr) *clamped = n_clamped;
  return d;
}

ProsodyContours to_contours(const ContourVars& c) {
  ProsodyContours out;
  const std::vector<int> d = durations_from(c.log_duration, c.mask);
  for (std::size_t i = 0; i < c.mask.size(); ++i) {
    if (!c.mask[i]) continue;
    const auto r = static_cast<Index>(i);
    out.pitch.push_back(c.pitch.value()(r, 0));
    out.energy.push_back(c.energy.value()(r, 0));
    out.log_duration.push_back(c.log_duration.value()(r, 0));
    out.durations.push_back(d[i]);
  }
  return out;
}

Backbone::Backbone(const BackboneConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(splitmix64(seed ^ 0xbac4b0e5ULL));
  const Index d = cfg_.width;
  phoneme_embedding_ = {"backbone.phoneme_embedding",
                        nn::xavier_uniform(cfg_.vocab_size, d, rng)};
  speaker_embedding_ = {"backbone.speaker_embedding",
                        nn::xavier_uniform(cfg_.n_speakers, d, rng)};
  for (int i = 0; i < cfg_.encoder_blocks; ++i) {
    encoder_.emplace_back("backbone.encoder." + std::to_string(i), d, cfg_.heads,
                          cfg_.ffn_hidden, cfg_.conv_kernel, rng);
  }
  variance_hidden_ = nn::Linear("backbone.variance.hidden", d, cfg_.variance_hidden, rng);
  variance_out_ = nn::Linear("backbone.variance.out", cfg_.variance_hidden, 3, rng);
  pitch_table_ = {"backbone.pitch_embedding", nn::xavier_uniform(cfg_.embed_bins, d, rng)};
  energy_table_ = {"backbone.energy_embedding", nn::xavier_uniform(cfg_.embed_bins, d, rng)};
  for (int i = 0; i < cfg_.decoder_blocks; ++i) {
    decoder_.emplace_back("backbone.decoder." + std::to_string(i), d, cfg_.heads,
                          cfg_.ffn_hidden, cfg_.conv_kernel, rng);
  }
  mel_out_ = nn::Linear("backbone.mel_out", d, cfg_.mel_bins, rng);
}

PhonemeLatents Backbone::encode(nn::Binder& b, const PhonemeSequence& text,
                                int speaker) const {
  text.validate(std::numeric_limits<int>::max());
  if (text.vocab_size != cfg_.vocab_size) {
    for (int id : text.ids) {
      if (id >= cfg_.vocab_size) {
        throw ContractViolation("encode: phoneme id " + std::to_string(id) +
                                " outside backbone vocabulary");
      }
    }
  }
  if (speaker < 0 || speaker >= cfg_.n_speakers) {
    throw ContractViolation("encode: speaker " + std::to_string(speaker) +
                            " out of range");
  }
  const auto len = static_cast<Index>(text.size());
  std::vector<Index> ids(text.ids.begin(), text.ids.end());
  Var x = ag::gather_rows(b(phoneme_embedding_), ids);
  x = x + ag::constant(nn::sinusoid_positions(len, cfg_.width));
  const std::vector<Index> spk(static_cast<std::size_t>(len), speaker);
  x = x + ag::gather_rows(b(speaker_embedding_), spk);
  for (const auto& block : encoder_) x = block(b, x);
  return {x, std::vector<bool>(static_cast<std::size_t>(len), true)};
}

VarianceOutput Backbone::predict_variance(nn::Binder& b,
                                          const PhonemeLatents& latents) const {
  const Var h = ag::relu(variance_hidden_(b, latents.values));
  Var out = variance_out_(b, h);
  if (!all_valid(latents.mask)) out = ag::mul_col(out, mask_column(latents.mask));
  return {ag::slice_cols(out, 0, 1), ag::slice_cols(out, 1, 1),
          ag::slice_cols(out, 2, 1), latents.mask};
}

Var Backbone::length_regulate(nn::Binder& b, const PhonemeLatents& latents,
                              const Var& pitch, const Var& energy,
                              const std::vector<int>& durations) const {
  const auto len = static_cast<std::size_t>(latents.length());
  if (durations.size() != len || static_cast<std::size_t>(pitch.rows()) != len ||
      static_cast<std::size_t>(energy.rows()) != len) {
    throw ContractViolation("length_regulate: contour lengths differ from latents");
  }
  const Var h = latents.values + ag::interp_embed(pitch, b(pitch_table_)) +
                ag::interp_embed(energy, b(energy_table_));
  std::vector<Index> index;
  for (std::size_t l = 0; l < len; ++l) {
    if (!latents.mask[l]) continue;
    const int d = std::clamp(durations[l], 1, kMaxPhonemeFrames);
    for (int k = 0; k < d; ++k) index.push_back(static_cast<Index>(l));
  }
  if (index.empty()) throw ContractViolation("length_regulate: no valid phonemes");
  return ag::gather_rows(h, index);
}

Var Backbone::decode(nn::Binder& b, const Var& frames) const {
  if (frames.rows() < 1) throw ContractViolation("decode: empty frame sequence");
  Var x = frames + ag::constant(nn::sinusoid_positions(frames.rows(), cfg_.width));
  for (const auto& block : decoder_) x = block(b, x);
  return mel_out_(b, x);
}

nn::ParamList Backbone::encoder_params() {
  nn::ParamList out{&phoneme_embedding_, &speaker_embedding_};
  for (auto& block : encoder_) block.collect(out);
  return out;
}

nn::ParamList Backbone::variance_params() {
  nn::ParamList out;
  variance_hidden_.collect(out);
  variance_out_.collect(out);
  return out;
}

nn::ParamList Backbone::decoder_params() {
  nn::ParamList out{&pitch_table_, &energy_table_};
  for (auto& block : decoder_) block.collect(out);
  mel_out_.collect(out);
  return out;
}

nn::ParamList Backbone::params() {
  nn::ParamList out = encoder_params();
  for (auto* p : variance_params()) out.push_back(p);
  for (auto* p : decoder_params()) out.push_back(p);
  return out;
}

std::unique_ptr<Backbone> Backbone::clone() const {
  auto copy = std::make_unique<Backbone>(cfg_);
  auto* self = const_cast<Backbone*>(this);
  const nn::ParamList src = self->params();
  const nn::ParamList dst = copy->params();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
  copy->frozen_ = frozen_;
  return copy;
}

void Backbone::save(const std::filesystem::path& path) const {
  TensorFile file;
  file.header = {{"format", "SRG1"},
                 {"kind", "backbone"},
                 {"frozen", frozen_},
                 {"config", config::to_json(cfg_)}};
  for (const auto* p : const_cast<Backbone*>(this)->params()) {
    file.tensors.emplace_back(p->name, p->value);
  }
  write_tensor_file(file, path);
}

std::unique_ptr<Backbone> Backbone::load(const std::filesystem::path& path) {
  const TensorFile file = read_tensor_file(path);
  if (file.header.value("kind", "") != "backbone") {
    throw ParseError(path.string() + ": not a backbone checkpoint");
  }
  auto backbone = std::make_unique<Backbone>(
      config::backbone_from_json(file.header.at("config")));
  for (auto* p : backbone->params()) {
    const auto& m = file.get(p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw ParseError(path.string() + ": shape mismatch for " + p->name);
    }
    p->value = m;
  }
  backbone->frozen_ = file.header.value("frozen", true);
  return backbone;
}

Synthesis two_stage_synthesize(const Backbone& backbone,
                               const PhonemeSequence& text, int speaker) {
  nn::Binder b;
  const PhonemeLatents latents = backbone.encode(b, text, speaker);
  const ContourVars c = squash(backbone.predict_variance(b, latents));
  const std::vector<int> d = durations_from(c.log_duration, c.mask);
  const Var frames = backbone.length_regulate(b, latents, c.pitch, c.energy, d);
  Synthesis out;
  out.mel.values = backbone.decode(b, frames).value();
  out.contours = to_contours(c);
  return out;
}

namespace {

Matrix column(const std::vector<double>& v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Index>(i), 0) = v[i];
  return m;
}

struct PretrainTerms {
  Var total;
  Var mel_error;
};

PretrainTerms pretrain_terms(const Backbone& backbone, nn::Binder& b,
                             const corpus::SpeechUtterance& utt) {
  const auto& truth = utt.true_prosody;
  const PhonemeLatents latents = backbone.encode(b, utt.text, utt.speaker_id);
  const VarianceOutput v = backbone.predict_variance(b, latents);
  const Var pitch_true = ag::constant(column(truth.pitch));
  const Var energy_true = ag::constant(column(truth.energy));
  const Var logdur_true = ag::constant(column(truth.log_duration));
  const Var frames = backbone.length_regulate(b, latents, pitch_true, energy_true,
                                              truth.durations);
  const Var mel = backbone.decode(b, frames);
  const Var mel_error = ag::mean(ag::abs(mel - ag::constant(utt.mel.values)));
  const Var variance_error =
      ag::mean(ag::square(ag::sigmoid(v.pitch_logit) - pitch_true)) +
      ag::mean(ag::square(ag::sigmoid(v.energy_logit) - energy_true)) +
      ag::mean(ag::square(v.log_duration - logdur_true));
  return {mel_error + variance_error, mel_error};
}

}  // namespace

double teacher_forced_mel_error(const Backbone& backbone,
                                const std::vector<corpus::SpeechUtterance>& corpus) {
  if (corpus.empty()) throw ContractViolation("mel error: empty corpus");
  double total = 0.0;
  for (const auto& utt : corpus) {
    nn::Binder b;
    total += pretrain_terms(backbone, b, utt).mel_error.scalar();
  }
  return total / static_cast<double>(corpus.size());
}

PretrainResult pretrain_backbone(Backbone& backbone,
                                 const std::vector<corpus::SpeechUtterance>& corpus,
                                 const PretrainOptions& options) {
  if (corpus.empty()) throw ContractViolation("pretrain_backbone: empty corpus");
  if (options.batch_size < 1) throw ConfigError("pretrain_backbone: batch_size < 1");
  PretrainResult result;
  result.initial_mel_error = teacher_forced_mel_error(backbone, corpus);
  const nn::ParamList params = backbone.params();
  nn::AdamW::Options opt;
  opt.lr = options.learning_rate;
  nn::AdamW adam(params, opt);
  std::mt19937_64 rng(splitmix64(options.seed ^ 0x9e7ae11ULL));
  for (int step = 0; step < options.steps; ++step) {
    nn::GradMap grads;
    double loss = 0.0;
    for (int i = 0; i < options.batch_size; ++i) {
      const auto& utt = corpus[static_cast<std::size_t>(
          uniform_int(rng, 0, static_cast<std::int64_t>(corpus.size()) - 1))];
      nn::Binder b(params);
      const PretrainTerms terms = pretrain_terms(backbone, b, utt);
      ag::backward(terms.total);
      grads.add_from(b, params);
      loss += terms.total.scalar();
    }
    loss /= options.batch_size;
    if (!std::isfinite(loss)) {
      throw TrainingError("pretrain_backbone: non-finite loss at step " +
                          std::to_string(step));
    }
    grads.scale(1.0 / options.batch_size);
    adam.step(grads);
    result.loss_curve.push_back(loss);
    if (options.on_step) options.on_step(step, loss);
  }
  result.final_mel_error = teacher_forced_mel_error(backbone, corpus);
  backbone.freeze();
  return result;
}

}  // namespace s2p::tts
