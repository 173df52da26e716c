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

// Toy non-autoregressive synthesis core: phoneme encoder, variance
// predictor, length regulator with pitch/energy embeddings, mel decoder.

#ifndef S2P_TTS_BACKBONE_H_
#define S2P_TTS_BACKBONE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "s2p/corpus.h"
#include "s2p/nn.h"
#include "s2p/prosody.h"

namespace s2p::tts {

using ag::Var;
using corpus::MelSpectrogram;
using corpus::PhonemeSequence;

struct BackboneConfig {
  int vocab_size = 32;
  int width = 64;
  int heads = 2;
  int ffn_hidden = 128;
  int conv_kernel = 3;
  int encoder_blocks = 2;
  int decoder_blocks = 2;
  int variance_hidden = 64;
  int embed_bins = 32;
  int mel_bins = 16;
  int n_speakers = 2;

  void validate() const;
};

// L x d latents. Rows where mask is false are exact zeros.
struct PhonemeLatents {
  Var values;
  std::vector<bool> mask;

  int length() const { return static_cast<int>(mask.size()); }
  int valid_length() const;
};

// Zero-pads latents to `length` rows and extends the mask with false.
PhonemeLatents pad_latents(const PhonemeLatents& latents, int length);

// Raw variance-predictor outputs, each L x 1. Pitch and energy are logits;
// the bounded contours are sigmoid(logit).
struct VarianceOutput {
  Var pitch_logit;
  Var energy_logit;
  Var log_duration;
  std::vector<bool> mask;
};

// Squashed contours as graph values (masked rows forced to zero).
struct ContourVars {
  Var pitch;
  Var energy;
  Var log_duration;
  std::vector<bool> mask;
};

ContourVars squash(const VarianceOutput& v);

// Durations by duration_from_log over unmasked rows; masked rows get 0.
// `clamped` counts entries that needed clamping into [1, kMaxPhonemeFrames].
std::vector<int> durations_from(const Var& log_duration,
                                const std::vector<bool>& mask,
                                int* clamped = nullptr);

// Plain-value contours over unmasked positions.
ProsodyContours to_contours(const ContourVars& c);

class Backbone {
 public:
  explicit Backbone(const BackboneConfig& cfg, std::uint64_t seed = 0);
  Backbone(const Backbone&) = delete;
  Backbone& operator=(const Backbone&) = delete;

  const BackboneConfig& config() const { return cfg_; }

  PhonemeLatents encode(nn::Binder& b, const PhonemeSequence& text,
                        int speaker = 0) const;
  VarianceOutput predict_variance(nn::Binder& b,
                                  const PhonemeLatents& latents) const;
  // pitch/energy are L x 1 values in [0, 1]; rows of latents whose mask is
  // false are dropped. Returns N x d frame latents with N = sum(durations).
  Var length_regulate(nn::Binder& b, const PhonemeLatents& latents,
                      const Var& pitch, const Var& energy,
                      const std::vector<int>& durations) const;
  Var decode(nn::Binder& b, const Var& frames) const;

  nn::ParamList params();
  nn::ParamList encoder_params();
  nn::ParamList variance_params();
  nn::ParamList decoder_params();

  // Deep copy of configuration, parameters and frozen flag.
  std::unique_ptr<Backbone> clone() const;

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  void save(const std::filesystem::path& path) const;
  // Loads parameters into a backbone built from the stored config.
  static std::unique_ptr<Backbone> load(const std::filesystem::path& path);

 private:
  BackboneConfig cfg_;
  nn::Parameter phoneme_embedding_;
  nn::Parameter speaker_embedding_;
  std::vector<nn::FftBlock> encoder_;
  nn::Linear variance_hidden_;
  nn::Linear variance_out_;
  nn::Parameter pitch_table_;
  nn::Parameter energy_table_;
  std::vector<nn::FftBlock> decoder_;
  nn::Linear mel_out_;
  bool frozen_ = false;
};

struct Synthesis {
  MelSpectrogram mel;
  ProsodyContours contours;
};

// encode -> predict_variance -> length_regulate -> decode, no sign input.
Synthesis two_stage_synthesize(const Backbone& backbone,
                               const PhonemeSequence& text, int speaker = 0);

struct PretrainOptions {
  int steps = 2000;
  int batch_size = 8;
  double learning_rate = 2e-3;
  std::uint64_t seed = 0;
  // Called after every step with (step, loss).
  std::function<void(int, double)> on_step;
};

struct PretrainResult {
  std::vector<double> loss_curve;  // one total loss per step
  double initial_mel_error = 0.0;  // mean absolute error on the corpus
  double final_mel_error = 0.0;
};

// Teacher-forced supervised training; freezes the backbone on return.
// Throws TrainingError naming the step when the loss becomes non-finite.
PretrainResult pretrain_backbone(Backbone& backbone,
                                 const std::vector<corpus::SpeechUtterance>& corpus,
                                 const PretrainOptions& options);

// Teacher-forced mean absolute mel error over a corpus.
double teacher_forced_mel_error(const Backbone& backbone,
                                const std::vector<corpus::SpeechUtterance>& corpus);

}  // namespace s2p::tts

#endif  // S2P_TTS_BACKBONE_H_
