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

#include "s2p/sign_branch.h"

#include <cmath>
#include <sstream>

#include "s2p/errors.h"
#include "s2p/rng.h"

namespace s2p::sign {

using ag::Index;

namespace {

constexpr int kInputChannels = 4;  // x, y, dx, dy per joint

// (T x 26) positions -> (T x 52) joint-major [x, y, dx, dy] with a zero
// first velocity row.
Matrix joint_features(const Matrix& frames) {
  const Index t_len = frames.rows();
  Matrix out = Matrix::Zero(t_len, corpus::kNumJoints * kInputChannels);
  for (Index t = 0; t < t_len; ++t) {
    for (int j = 0; j < corpus::kNumJoints; ++j) {
      for (int c = 0; c < 2; ++c) {
        out(t, j * kInputChannels + c) = frames(t, 2 * j + c);
        if (t > 0) {
          out(t, j * kInputChannels + 2 + c) =
              frames(t, 2 * j + c) - frames(t - 1, 2 * j + c);
        }
      }
    }
  }
  return out;
}

Var mean_over_mask(const Var& column, const std::vector<bool>& mask) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) rows.push_back(static_cast<Index>(i));
  }
  if (rows.empty()) throw ContractViolation("no unmasked positions");
  if (rows.size() == mask.size()) return ag::mean(column);
  return ag::mean(ag::gather_rows(column, rows));
}

}  // namespace

void SignBranchConfig::validate() const {
  if (width < 1 || heads < 1 || ffn_hidden < 1 || graph_channels < 1 ||
      temporal_channels < 1 || short_kernel < 1 || long_kernel < 1 ||
      estimator_channels < 1) {
    throw ConfigError("sign branch: sizes must be positive");
  }
  if (width % heads != 0) throw ConfigError("sign branch: width must divide by heads");
  if (bins < 2) throw ConfigError("sign branch: need at least 2 label bins");
  if (!(shoulder_tolerance > 0.0)) {
    throw ConfigError("sign branch: shoulder tolerance must be positive");
  }
}

VisualBackbone::VisualBackbone(const SignBranchConfig& cfg, std::mt19937_64& rng)
    : tolerance_(cfg.shoulder_tolerance) {
  const int j = corpus::kNumJoints;
  const int gc = cfg.graph_channels;
  const int tc = cfg.temporal_channels;
  adjacency_ = {"visual.adjacency", corpus::Skeleton::standard().normalized_adjacency()};
  nn::round_to_float(adjacency_.value);
  adjacency_delta_ = {"visual.adjacency_delta", Matrix::Zero(j, j)};
  graph_weight_ = {"visual.graph.weight", nn::xavier_uniform(kInputChannels, gc, rng)};
  graph_bias_ = {"visual.graph.bias", Matrix::Zero(1, gc)};
  short1_ = nn::Conv1d("visual.short.0", j * gc, tc, cfg.short_kernel, 2,
                       ag::Padding::kZero, rng);
  short2_ = nn::Conv1d("visual.short.1", tc, tc, cfg.short_kernel, 2,
                       ag::Padding::kZero, rng);
  long1_ = nn::Conv1d("visual.long.0", j * gc, tc, cfg.long_kernel, 2,
                      ag::Padding::kZero, rng);
  long2_ = nn::Conv1d("visual.long.1", tc, tc, cfg.long_kernel, 2,
                      ag::Padding::kZero, rng);
  project_ = nn::Linear("visual.project", 2 * tc, cfg.width, rng);
}

SignFeatures VisualBackbone::operator()(nn::Binder& b,
                                        const KeypointSequence& kps) const {
  const double width = corpus::mean_shoulder_width(kps.frames);
  if (!(std::abs(width - 1.0) <= tolerance_)) {
    std::ostringstream msg;
    msg << "visual backbone: clip '" << kps.clip_id
        << "' is not normalized (mean shoulder width " << width << ")";
    throw ContractViolation(msg.str());
  }
  return forward(b, kps.frames);
}

SignFeatures VisualBackbone::forward(nn::Binder& b, const Matrix& frames) const {
  if (frames.rows() < 1 || frames.cols() != 2 * corpus::kNumJoints) {
    throw ContractViolation("visual backbone: frames must be T x 26 with T >= 1");
  }
  const Var x = ag::constant(joint_features(frames));
  const Var adj = b(adjacency_) + b(adjacency_delta_);
  const Var g = ag::relu(ag::graph_conv(x, adj, b(graph_weight_), b(graph_bias_),
                                        corpus::kNumJoints));
  const Var s = ag::relu(short2_(b, ag::relu(short1_(b, g))));
  const Var l = ag::relu(long2_(b, ag::relu(long1_(b, g))));
  const std::array<Var, 2> parts = {s, l};
  const Var out = project_(b, ag::concat_cols(parts));
  return {out, std::vector<bool>(static_cast<std::size_t>(out.rows()), true)};
}

void VisualBackbone::collect(nn::ParamList& out) {
  out.push_back(&adjacency_delta_);
  out.push_back(&graph_weight_);
  out.push_back(&graph_bias_);
  short1_.collect(out);
  short2_.collect(out);
  long1_.collect(out);
  long2_.collect(out);
  project_.collect(out);
}

CrossBlock::CrossBlock(const std::string& name, int width, int heads, int hidden,
                       std::mt19937_64& rng)
    : attention(name + ".attention", width, heads, rng),
      norm1(name + ".norm1", width),
      ff1(name + ".ff1", width, hidden, rng),
      ff2(name + ".ff2", hidden, width, rng),
      norm2(name + ".norm2", width) {}

Var CrossBlock::operator()(nn::Binder& b, const Var& queries,
                           const Var& memory) const {
  const Var h = norm1(b, queries + attention(b, queries, memory));
  return norm2(b, h + ff2(b, ag::relu(ff1(b, h))));
}

void CrossBlock::collect(nn::ParamList& out) {
  attention.collect(out);
  norm1.collect(out);
  ff1.collect(out);
  ff2.collect(out);
  norm2.collect(out);
}

tts::ContourVars mix_contours(const tts::VarianceOutput& phoneme,
                              const Var& residual, const Var& gate,
                              AdapmChannels channels) {
  const Var offset = ag::mul_col(residual, gate);
  tts::VarianceOutput mixed = phoneme;
  mixed.pitch_logit = phoneme.pitch_logit + ag::slice_cols(offset, 0, 1);
  mixed.energy_logit = phoneme.energy_logit + ag::slice_cols(offset, 1, 1);
  if (channels == AdapmChannels::kAll) {
    mixed.log_duration = phoneme.log_duration + ag::slice_cols(offset, 2, 1);
  }
  return tts::squash(mixed);
}

AdaPM::AdaPM(const SignBranchConfig& cfg, std::mt19937_64& rng)
    : channels_(cfg.adapm_channels),
      sign_attention_("adapm.sign_attention", cfg.width, cfg.heads, cfg.ffn_hidden, rng),
      moe_attention_("adapm.moe_attention", cfg.width, cfg.heads, cfg.ffn_hidden, rng),
      residual_head_("adapm.residual", cfg.width, 3, rng, /*zero_init=*/true),
      gate_head_("adapm.gate", cfg.width, 1, rng, /*zero_init=*/true) {}

AdaPMOutput AdaPM::operator()(nn::Binder& b, const tts::PhonemeLatents& latents,
                              const tts::VarianceOutput& phoneme,
                              const SignFeatures& sign) const {
  const Var signed_latents = sign_attention_(b, latents.values, sign.values);
  const Var routed = moe_attention_(b, latents.values, sign.values);
  AdaPMOutput out;
  out.residual = residual_head_(b, signed_latents);
  out.gate = ag::sigmoid(gate_head_(b, routed));
  out.mixed = mix_contours(phoneme, out.residual, out.gate, channels_);
  out.w_sign = mean_over_mask(out.gate, latents.mask);
  return out;
}

void AdaPM::collect(nn::ParamList& out) {
  sign_attention_.collect(out);
  moe_attention_.collect(out);
  residual_head_.collect(out);
  gate_head_.collect(out);
}

Estimator::Estimator(const SignBranchConfig& cfg, std::mt19937_64& rng)
    : conv1_("estimator.conv1", 2, cfg.estimator_channels, 3, 1,
             ag::Padding::kReplicate, rng),
      conv2_("estimator.conv2", cfg.estimator_channels, cfg.estimator_channels, 3,
             1, ag::Padding::kReplicate, rng) {
  for (int c = 0; c < sign_prosody::kNumChannels; ++c) {
    heads_[c] = nn::Linear("estimator.head." + std::string(sign_prosody::kChannelNames[c]),
                           cfg.estimator_channels, cfg.bins, rng);
  }
}

PredictedLabel Estimator::operator()(nn::Binder& b, const Var& pitch,
                                     const Var& energy,
                                     const std::vector<bool>& mask) const {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) rows.push_back(static_cast<Index>(i));
  }
  if (rows.empty()) throw ContractViolation("estimator: no unmasked positions");
  if (rows.size() == mask.size()) return (*this)(b, pitch, energy);
  return (*this)(b, ag::gather_rows(pitch, rows), ag::gather_rows(energy, rows));
}

PredictedLabel Estimator::operator()(nn::Binder& b, const Var& pitch,
                                     const Var& energy) const {
  if (pitch.rows() < 1 || pitch.rows() != energy.rows() || pitch.cols() != 1 ||
      energy.cols() != 1) {
    throw ContractViolation("estimator: pitch and energy must be equal-length columns");
  }
  const std::array<Var, 2> parts = {pitch, energy};
  const Var x = ag::concat_cols(parts);
  const Var h = ag::relu(conv2_(b, ag::relu(conv1_(b, x))));
  const Var pooled = ag::mean_rows(h);
  PredictedLabel out;
  for (int c = 0; c < sign_prosody::kNumChannels; ++c) {
    out[c] = ag::softmax_rows(heads_[c](b, pooled));
  }
  return out;
}

void Estimator::collect(nn::ParamList& out) {
  conv1_.collect(out);
  conv2_.collect(out);
  for (auto& h : heads_) h.collect(out);
}

SignBranch::SignBranch(const SignBranchConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(splitmix64(seed ^ 0x5167b7a1ULL));
  visual = VisualBackbone(cfg_, rng);
  adapm = AdaPM(cfg_, rng);
  estimator = Estimator(cfg_, rng);
}

nn::ParamList SignBranch::params() {
  nn::ParamList out;
  visual.collect(out);
  adapm.collect(out);
  estimator.collect(out);
  return out;
}

GeneratorOutput generate(const tts::Backbone& backbone, const SignBranch& branch,
                         nn::Binder& b, const corpus::PhonemeSequence& text,
                         const KeypointSequence& clip, int speaker) {
  if (branch.config().width != backbone.config().width) {
    throw ConfigError("sign branch width differs from backbone width");
  }
  GeneratorOutput out;
  out.latents = backbone.encode(b, text, speaker);
  out.phoneme = backbone.predict_variance(b, out.latents);
  const SignFeatures sign = branch.visual(b, clip);
  out.adapm = branch.adapm(b, out.latents, out.phoneme, sign);
  const auto& mixed = out.adapm.mixed;
  out.durations = tts::durations_from(mixed.log_duration, mixed.mask);
  const Var frames = backbone.length_regulate(b, out.latents, mixed.pitch,
                                              mixed.energy, out.durations);
  out.mel = backbone.decode(b, frames);
  return out;
}

}  // namespace s2p::sign
