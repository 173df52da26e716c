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

#include "s2p/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "s2p/checkpoint.h"
#include "s2p/config.h"
#include "s2p/errors.h"
#include "s2p/rng.h"

namespace s2p::train {

using ag::Index;

namespace {

constexpr int kDiscLayers = 3;

int pooled_rows(int valid_frames) {
  int rows = valid_frames;
  for (int i = 0; i < kDiscLayers; ++i) rows = (rows + 1) / 2;
  return std::max(rows, 1);
}

nn::AdamW::Options adam_options(double lr, double wd) {
  nn::AdamW::Options o;
  o.lr = lr;
  o.weight_decay = wd;
  return o;
}

const corpus::SpeakerStats& stats_for(const TrainData& data, int speaker) {
  auto it = data.speakers.find(speaker);
  if (it == data.speakers.end()) {
    throw TrainingError("no speaker statistics for speaker " + std::to_string(speaker));
  }
  return it->second;
}

double real_label_score(double d, losses::DiscConvention convention) {
  return convention == losses::DiscConvention::kLsgan ? d : 1.0 - d;
}

void check_finite(const losses::LossReport& report, std::int64_t step) {
  const std::string bad = report.first_non_finite();
  if (!bad.empty()) {
    throw TrainingError("non-finite loss component '" + bad + "' at step " +
                        std::to_string(step));
  }
}

}  // namespace

Discriminator::Discriminator(const DiscriminatorConfig& cfg, int mel_bins,
                             std::uint64_t seed)
    : cfg_(cfg) {
  if (cfg.channels < 1 || cfg.kernel < 1 || cfg.crop_frames < 1) {
    throw ConfigError("discriminator: sizes must be positive");
  }
  std::mt19937_64 rng(splitmix64(seed ^ 0xd15c0ULL));
  conv1_ = nn::Conv1d("disc.conv1", mel_bins, cfg.channels, cfg.kernel, 2,
                      ag::Padding::kZero, rng);
  conv2_ = nn::Conv1d("disc.conv2", cfg.channels, cfg.channels, cfg.kernel, 2,
                      ag::Padding::kZero, rng);
  conv3_ = nn::Conv1d("disc.conv3", cfg.channels, cfg.channels, cfg.kernel, 2,
                      ag::Padding::kZero, rng);
  out_ = nn::Linear("disc.out", cfg.channels, 1, rng);
}

Var Discriminator::operator()(nn::Binder& b, const Var& crop, int valid_frames) const {
  constexpr double kSlope = 0.2;
  Var h = ag::leaky_relu(conv1_(b, crop), kSlope);
  h = ag::leaky_relu(conv2_(b, h), kSlope);
  h = ag::leaky_relu(conv3_(b, h), kSlope);
  const int rows = std::min<int>(pooled_rows(valid_frames), static_cast<int>(h.rows()));
  if (rows < h.rows()) h = ag::slice_rows(h, 0, rows);
  return out_(b, ag::mean_rows(h));
}

nn::ParamList Discriminator::params() {
  nn::ParamList out;
  conv1_.collect(out);
  conv2_.collect(out);
  conv3_.collect(out);
  out_.collect(out);
  return out;
}

Crop crop_mel(const Var& mel, int offset, int length) {
  const int n = static_cast<int>(mel.rows());
  if (offset < 0 || offset >= n) throw ContractViolation("crop_mel: offset out of range");
  const int take = std::min(length, n - offset);
  Var part = ag::slice_rows(mel, offset, take);
  if (take < length) part = ag::pad_rows(part, length);
  return {part, take};
}

Crop add_instance_noise(Crop crop, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return crop;
  Matrix noise = Matrix::Zero(crop.frames.rows(), crop.frames.cols());
  for (int r = 0; r < crop.valid; ++r) {
    for (Eigen::Index c = 0; c < noise.cols(); ++c) noise(r, c) = sigma * normal(rng);
  }
  crop.frames = ag::add(crop.frames, ag::constant(noise));
  return crop;
}

int sample_crop_offset(int n_frames, int length, std::mt19937_64& rng) {
  if (n_frames <= length) return 0;
  return static_cast<int>(uniform_int(rng, 0, n_frames - length));
}

void TrainConfig::validate() const {
  weights.validate();
  sign_branch.validate();
  if (!(generator_lr > 0.0) || !(discriminator_lr > 0.0)) {
    throw ConfigError("train: learning rates must be positive");
  }
  if (generator_weight_decay < 0.0 || discriminator_weight_decay < 0.0) {
    throw ConfigError("train: weight decay must be nonnegative");
  }
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (steps < 0) throw ConfigError("train: steps must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train: train_fraction must lie in (0, 1)");
  }
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
  if (discriminator.channels < 1 || discriminator.kernel < 1 ||
      discriminator.crop_frames < 1) {
    throw ConfigError("train: discriminator sizes must be positive");
  }
  if (!(discriminator.instance_noise >= 0.0)) {
    throw ConfigError("train: instance_noise must be >= 0");
  }
}

nlohmann::json TrainConfig::trajectory_json() const {
  nlohmann::json j = config::to_json(*this);
  j.erase("steps");
  j.erase("checkpoint_every");
  return j;
}

std::uint64_t TrainConfig::hash() const { return config::fnv1a64(trajectory_json()); }

TrainData prepare_data(std::vector<corpus::KeypointSequence> sign_corpus,
                       std::vector<corpus::SpeechUtterance> speech_corpus,
                       const TrainConfig& cfg) {
  if (sign_corpus.size() < 4) throw TrainingError("sign corpus needs at least 4 clips");
  if (speech_corpus.empty()) throw TrainingError("speech corpus is empty");
  TrainData data;
  const auto n_train = static_cast<std::size_t>(std::clamp<double>(
      std::round(cfg.train_fraction * static_cast<double>(sign_corpus.size())), 2.0,
      static_cast<double>(sign_corpus.size() - 1)));
  for (std::size_t i = 0; i < sign_corpus.size(); ++i) {
    (i < n_train ? data.train_clips : data.test_clips).push_back(std::move(sign_corpus[i]));
  }
  sign_prosody::LabelOptions label_options;
  label_options.bins = cfg.sign_branch.bins;
  label_options.normalization = cfg.label_normalization;
  if (cfg.label_normalization == sign_prosody::Normalization::kCorpus) {
    label_options.corpus_max = sign_prosody::corpus_motion_max(data.train_clips);
  }
  for (const auto& clip : data.train_clips) {
    data.labels.push_back(sign_prosody::prosody_label(clip, label_options));
  }
  data.motion = sign_prosody::motion_means(data.train_clips);
  data.speech = std::move(speech_corpus);
  data.speakers = corpus::compute_speaker_stats(data.speech);
  data.n_speakers = data.speakers.rbegin()->first + 1;
  return data;
}

TrainState::TrainState(const TrainConfig& cfg, std::unique_ptr<tts::Backbone> backbone)
    : cfg_(cfg), backbone_(std::move(backbone)) {
  cfg_.validate();
  if (!backbone_) throw TrainingError("train state needs a backbone");
  backbone_->freeze();
  if (cfg_.sign_branch.width != backbone_->config().width) {
    throw ConfigError("sign_branch.width must equal backbone.width");
  }
  branch_ = std::make_unique<sign::SignBranch>(cfg_.sign_branch, cfg_.seed);
  disc_ = std::make_unique<Discriminator>(cfg_.discriminator,
                                          backbone_->config().mel_bins, cfg_.seed);
  gen_opt_ = nn::AdamW(branch_->params(),
                       adam_options(cfg_.generator_lr, cfg_.generator_weight_decay));
  disc_opt_ = nn::AdamW(disc_->params(), adam_options(cfg_.discriminator_lr,
                                                      cfg_.discriminator_weight_decay));
  rng_.seed(splitmix64(cfg_.seed ^ 0x7a1aULL));
  hash_ = cfg_.hash();
}

SignBatch sample_sign_batch(TrainState& state, const TrainData& data) {
  SignBatch batch;
  const auto n = static_cast<std::int64_t>(data.train_clips.size());
  for (int i = 0; i < state.config().batch_size; ++i) {
    batch.clips.push_back(static_cast<int>(uniform_int(state.rng(), 0, n - 1)));
    batch.speakers.push_back(
        static_cast<int>(uniform_int(state.rng(), 0, data.n_speakers - 1)));
  }
  return batch;
}

RealBatch sample_real_batch(TrainState& state, const TrainData& data) {
  RealBatch batch;
  const auto n = static_cast<std::int64_t>(data.speech.size());
  for (int i = 0; i < state.config().batch_size; ++i) {
    batch.utterances.push_back(static_cast<int>(uniform_int(state.rng(), 0, n - 1)));
  }
  return batch;
}

losses::LossReport generator_step(TrainState& state, const TrainData& data,
                                  const SignBatch& batch) {
  const TrainConfig& cfg = state.config();
  const losses::LossWeights& w = cfg.weights;
  const nn::ParamList params = state.branch().params();
  const int crop_len = cfg.discriminator.crop_frames;
  const double noise = cfg.discriminator.instance_noise;
  nn::GradMap grads;
  losses::LossReport report;
  const auto n = static_cast<double>(batch.clips.size());
  for (std::size_t i = 0; i < batch.clips.size(); ++i) {
    const int ci = batch.clips[i];
    const int speaker = batch.speakers[i];
    const auto& clip = data.train_clips[static_cast<std::size_t>(ci)];
    const auto& spk = stats_for(data, speaker);
    nn::Binder b(params);
    const sign::GeneratorOutput g =
        sign::generate(state.backbone(), state.branch(), b, clip.text, clip, speaker);
    const auto& mixed = g.adapm.mixed;
    const auto& mask = mixed.mask;
    int clamped = 0;
    tts::durations_from(mixed.log_duration, mask, &clamped);

    // Natural-speech terms.
    const Crop crop = add_instance_noise(
        crop_mel(g.mel,
                 sample_crop_offset(static_cast<int>(g.mel.rows()), crop_len, state.rng()),
                 crop_len),
        noise, state.rng());
    const Var d_fake = state.discriminator()(b, crop.frames, crop.valid);
    const Var adv = losses::adv_loss(d_fake);
    const tts::ContourVars two_stage = tts::squash(g.phoneme);
    const Var std_p = losses::masked_std(mixed.pitch, mask);
    const Var std_e = losses::masked_std(mixed.energy, mask);
    const Var ir = losses::ir_loss(
        std_p, std_e, ag::constant(losses::masked_std(two_stage.pitch, mask).value()),
        ag::constant(losses::masked_std(two_stage.energy, mask).value()),
        cfg.ir_direction);
    const Var mean_p = losses::masked_mean(mixed.pitch, mask);
    const Var mean_e = losses::masked_mean(mixed.energy, mask);
    const Var sl = losses::sl_loss(mean_p, mean_e, spk);
    const Var natural = losses::natural_loss(adv, ir, sl, w);

    // Sign reconstruction and prosody matching.
    const sign::PredictedLabel predicted =
        state.branch().estimator(b, mixed.pitch, mixed.energy, mask);
    const Var signrec =
        losses::signrec_loss(data.labels[static_cast<std::size_t>(ci)], predicted);
    const Var mu_e = ag::scale(ag::add_scalar(mean_e, -spk.mean_energy), 1.0 / spk.std_energy);
    const Var mu_p = ag::scale(ag::add_scalar(mean_p, -spk.mean_pitch), 1.0 / spk.std_pitch);
    const Var promo = losses::promo_loss(
        mu_e, mu_p, ag::constant(data.motion.mu_hand[static_cast<std::size_t>(ci)]),
        ag::constant(data.motion.mu_face[static_cast<std::size_t>(ci)]), w.margin);
    const Var weight = losses::weight_loss(g.adapm.w_sign);

    const Var zero = ag::constant(0.0);
    const Var total = losses::total_loss(
        cfg.use_natural ? natural : zero, cfg.use_signrec ? signrec : zero,
        cfg.use_promo ? promo : zero, state.any_generator_loss() ? weight : zero, w);

    if (total.requires_grad()) {
      ag::backward(total);
      grads.add_from(b, params);
    }
    report.adv += adv.scalar() / n;
    report.ir += ir.scalar() / n;
    report.sl += sl.scalar() / n;
    report.natural += natural.scalar() / n;
    report.signrec += signrec.scalar() / n;
    report.promo += promo.scalar() / n;
    report.weight += weight.scalar() / n;
    report.total += total.scalar() / n;
    report.w_sign += g.adapm.w_sign.scalar() / n;
    report.clamped_durations += clamped;
  }
  check_finite(report, state.step());
  if (state.any_generator_loss()) {
    grads.scale(1.0 / n);
    state.generator_optimizer().step(grads);
  }
  return report;
}

losses::LossReport discriminator_step(TrainState& state, const TrainData& data,
                                      const RealBatch& real, const SignBatch& fake) {
  const TrainConfig& cfg = state.config();
  const int crop_len = cfg.discriminator.crop_frames;
  const double noise = cfg.discriminator.instance_noise;
  const nn::ParamList params = state.discriminator().params();
  const auto pairs = std::min(real.utterances.size(), fake.clips.size());
  if (pairs == 0) throw TrainingError("discriminator_step: empty batch");
  nn::GradMap grads;
  losses::LossReport report;
  int correct = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    // Generated mel without generator gradients.
    nn::Binder frozen;
    const auto& clip = data.train_clips[static_cast<std::size_t>(fake.clips[i])];
    const sign::GeneratorOutput g = sign::generate(state.backbone(), state.branch(), frozen,
                                                   clip.text, clip, fake.speakers[i]);
    const Var fake_mel = ag::constant(g.mel.value());
    const Var real_mel = ag::constant(
        data.speech[static_cast<std::size_t>(real.utterances[i])].mel.values);

    nn::Binder b(params);
    const Crop real_crop = add_instance_noise(
        crop_mel(real_mel,
                 sample_crop_offset(static_cast<int>(real_mel.rows()), crop_len, state.rng()),
                 crop_len),
        noise, state.rng());
    const Crop fake_crop = add_instance_noise(
        crop_mel(fake_mel,
                 sample_crop_offset(static_cast<int>(fake_mel.rows()), crop_len, state.rng()),
                 crop_len),
        noise, state.rng());
    const Var d_real = state.discriminator()(b, real_crop.frames, real_crop.valid);
    const Var d_fake = state.discriminator()(b, fake_crop.frames, fake_crop.valid);
    const Var loss = losses::disc_loss(d_real, d_fake, cfg.disc_convention);
    ag::backward(loss);
    grads.add_from(b, params);
    report.disc += loss.scalar() / static_cast<double>(pairs);
    if (real_label_score(d_real.scalar(), cfg.disc_convention) > 0.5) ++correct;
    if (real_label_score(d_fake.scalar(), cfg.disc_convention) < 0.5) ++correct;
  }
  report.disc_accuracy = static_cast<double>(correct) / (2.0 * static_cast<double>(pairs));
  check_finite(report, state.step());
  grads.scale(1.0 / static_cast<double>(pairs));
  state.discriminator_optimizer().step(grads);
  return report;
}

std::vector<nlohmann::json> train(TrainState& state, const TrainData& data,
                                  const TrainOptions& options) {
  const TrainConfig& cfg = state.config();
  if (data.train_clips.empty() || data.speech.empty()) {
    throw TrainingError("train: corpora are empty");
  }
  std::ofstream metrics;
  if (!options.metrics_path.empty()) {
    if (options.metrics_path.has_parent_path()) {
      std::filesystem::create_directories(options.metrics_path.parent_path());
    }
    metrics.open(options.metrics_path, std::ios::app);
    if (!metrics) throw TrainingError("cannot open metrics log " + options.metrics_path.string());
  }
  std::vector<nlohmann::json> records;
  while (state.step() < cfg.steps) {
    const SignBatch gen_batch = sample_sign_batch(state, data);
    const losses::LossReport gen = generator_step(state, data, gen_batch);
    const RealBatch real = sample_real_batch(state, data);
    const SignBatch fake = sample_sign_batch(state, data);
    const losses::LossReport disc = discriminator_step(state, data, real, fake);
    state.set_step(state.step() + 1);

    nlohmann::json record = gen.to_json();
    record["disc"] = disc.disc;
    record["disc_accuracy"] = disc.disc_accuracy;
    record["step"] = state.step();
    if (metrics) metrics << record.dump() << '\n';
    if (options.on_step) options.on_step(record);
    records.push_back(std::move(record));

    if (cfg.checkpoint_every > 0 && !options.checkpoint_dir.empty() &&
        state.step() % cfg.checkpoint_every == 0) {
      save_checkpoint(state, options.checkpoint_dir /
                                 ("step_" + std::to_string(state.step()) + ".srg"));
    }
  }
  return records;
}

namespace {

void add_params(TensorFile& file, const nn::ParamList& params) {
  for (const auto* p : params) file.tensors.emplace_back(p->name, p->value);
}

void add_moments(TensorFile& file, const std::string& prefix, const nn::AdamW& opt) {
  const auto& params = opt.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    file.tensors.emplace_back(prefix + ".m." + params[i]->name, opt.first_moments()[i]);
    file.tensors.emplace_back(prefix + ".v." + params[i]->name, opt.second_moments()[i]);
  }
}

void load_params(const TensorFile& file, const nn::ParamList& params) {
  for (auto* p : params) {
    const auto& m = file.get(p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw ParseError("checkpoint shape mismatch for " + p->name);
    }
    p->value = m;
  }
}

void load_moments(const TensorFile& file, const std::string& prefix, nn::AdamW& opt) {
  const auto& params = opt.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt.first_moments()[i] = file.get(prefix + ".m." + params[i]->name);
    opt.second_moments()[i] = file.get(prefix + ".v." + params[i]->name);
  }
}

}  // namespace

void save_checkpoint(const TrainState& state_in, const std::filesystem::path& path) {
  auto& state = const_cast<TrainState&>(state_in);
  TensorFile file;
  std::ostringstream rng;
  rng << state.rng();
  std::ostringstream hash;
  hash << std::hex << state.config_hash();
  file.header = {{"format", "SRG1"},
                 {"kind", "train_state"},
                 {"version", 1},
                 {"step", state.step()},
                 {"config_hash", hash.str()},
                 {"rng", rng.str()},
                 {"generator_optimizer_steps", state.generator_optimizer().steps()},
                 {"discriminator_optimizer_steps", state.discriminator_optimizer().steps()},
                 {"train", config::to_json(state.config())},
                 {"backbone", config::to_json(state.backbone().config())}};
  add_params(file, state.backbone().params());
  add_params(file, state.branch().params());
  add_params(file, state.discriminator().params());
  add_moments(file, "adam.generator", state.generator_optimizer());
  add_moments(file, "adam.discriminator", state.discriminator_optimizer());
  write_tensor_file(file, path);
}

std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path,
                                            const TrainConfig* expected) {
  const TensorFile file = read_tensor_file(path);
  if (file.header.value("kind", "") != "train_state") {
    throw ParseError(path.string() + ": not a training checkpoint");
  }
  const TrainConfig stored = config::train_from_json(file.header.at("train"));
  const std::string stored_hash = file.header.at("config_hash").get<std::string>();
  TrainConfig cfg = stored;
  if (expected != nullptr) {
    std::ostringstream want;
    want << std::hex << expected->hash();
    if (want.str() != stored_hash) {
      throw TrainingError("config hash mismatch: checkpoint " + stored_hash +
                          ", current config " + want.str());
    }
    cfg = *expected;
  }
  auto backbone = std::make_unique<tts::Backbone>(
      config::backbone_from_json(file.header.at("backbone")));
  load_params(file, backbone->params());
  auto state = std::make_unique<TrainState>(cfg, std::move(backbone));
  load_params(file, state->branch().params());
  load_params(file, state->discriminator().params());
  load_moments(file, "adam.generator", state->generator_optimizer());
  load_moments(file, "adam.discriminator", state->discriminator_optimizer());
  state->generator_optimizer().set_steps(
      file.header.at("generator_optimizer_steps").get<std::int64_t>());
  state->discriminator_optimizer().set_steps(
      file.header.at("discriminator_optimizer_steps").get<std::int64_t>());
  std::istringstream rng(file.header.at("rng").get<std::string>());
  rng >> state->rng();
  state->set_step(file.header.at("step").get<std::int64_t>());
  return state;
}

}  // namespace s2p::train
