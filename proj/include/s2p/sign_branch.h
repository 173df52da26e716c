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

// Trainable sign-side networks: the keypoint visual backbone, the gated
// prosody mixer (AdaPM) and the prosody estimator.

#ifndef S2P_SIGN_BRANCH_H_
#define S2P_SIGN_BRANCH_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "s2p/corpus.h"
#include "s2p/nn.h"
#include "s2p/sign_prosody.h"
#include "s2p/tts_backbone.h"

namespace s2p::sign {

using ag::Matrix;
using ag::Var;
using corpus::KeypointSequence;

enum class AdapmChannels { kPitchEnergy, kAll };

struct SignBranchConfig {
  int width = 64;  // must equal the backbone width
  int heads = 2;
  int ffn_hidden = 128;
  int graph_channels = 8;
  int temporal_channels = 32;
  int short_kernel = 3;
  int long_kernel = 7;
  int estimator_channels = 32;
  int bins = 16;
  AdapmChannels adapm_channels = AdapmChannels::kAll;
  double shoulder_tolerance = 0.1;

  void validate() const;
};

// T' x d with T' = ceil(T / 4).
struct SignFeatures {
  Var values;
  std::vector<bool> mask;
};

class VisualBackbone {
 public:
  VisualBackbone() = default;
  VisualBackbone(const SignBranchConfig& cfg, std::mt19937_64& rng);

  // Rejects clips whose mean shoulder width is outside 1 +/- tolerance.
  SignFeatures operator()(nn::Binder& b, const KeypointSequence& kps) const;
  // Same network without the normalization check; frames is T x 26.
  SignFeatures forward(nn::Binder& b, const Matrix& frames) const;

  void collect(nn::ParamList& out);

 private:
  double tolerance_ = 0.1;
  nn::Parameter adjacency_;        // fixed normalized skeleton graph
  nn::Parameter adjacency_delta_;  // learnable edge weights, zero at init
  nn::Parameter graph_weight_;
  nn::Parameter graph_bias_;
  nn::Conv1d short1_, short2_, long1_, long2_;
  nn::Linear project_;
};

// Cross-attention block: latents attend to sign features, then a
// position-wise feed-forward layer; post-norm residuals.
struct CrossBlock {
  nn::MultiHeadAttention attention;
  nn::LayerNorm norm1;
  nn::Linear ff1;
  nn::Linear ff2;
  nn::LayerNorm norm2;

  CrossBlock() = default;
  CrossBlock(const std::string& name, int width, int heads, int hidden,
             std::mt19937_64& rng);
  Var operator()(nn::Binder& b, const Var& queries, const Var& memory) const;
  void collect(nn::ParamList& out);
};

struct AdaPMOutput {
  tts::ContourVars mixed;
  Var residual;  // L x 3: pitch, energy, log-duration offsets
  Var gate;      // L x 1, in [0, 1]
  Var w_sign;    // 1 x 1 mean gate over unmasked positions
};

// Mixes in the pre-squash domain: mixed = c + w * r per enabled channel,
// then pitch and energy go back through the sigmoid. Disabled channels
// pass c through untouched.
tts::ContourVars mix_contours(const tts::VarianceOutput& phoneme,
                              const Var& residual, const Var& gate,
                              AdapmChannels channels);

class AdaPM {
 public:
  AdaPM() = default;
  AdaPM(const SignBranchConfig& cfg, std::mt19937_64& rng);

  AdaPMOutput operator()(nn::Binder& b, const tts::PhonemeLatents& latents,
                         const tts::VarianceOutput& phoneme,
                         const SignFeatures& sign) const;
  void collect(nn::ParamList& out);

 private:
  AdapmChannels channels_ = AdapmChannels::kAll;
  CrossBlock sign_attention_;
  CrossBlock moe_attention_;
  nn::Linear residual_head_;  // zero-initialized
  nn::Linear gate_head_;      // zero-initialized
};

// One softmax distribution (1 x S) per motion channel.
using PredictedLabel = std::array<Var, sign_prosody::kNumChannels>;

class Estimator {
 public:
  Estimator() = default;
  Estimator(const SignBranchConfig& cfg, std::mt19937_64& rng);

  // pitch, energy: L x 1; only unmasked rows are read.
  PredictedLabel operator()(nn::Binder& b, const Var& pitch, const Var& energy,
                            const std::vector<bool>& mask) const;
  PredictedLabel operator()(nn::Binder& b, const Var& pitch,
                            const Var& energy) const;
  void collect(nn::ParamList& out);

 private:
  nn::Conv1d conv1_, conv2_;
  std::array<nn::Linear, sign_prosody::kNumChannels> heads_;
};

// Everything trained on the generator side.
class SignBranch {
 public:
  SignBranch(const SignBranchConfig& cfg, std::uint64_t seed);
  SignBranch(const SignBranch&) = delete;
  SignBranch& operator=(const SignBranch&) = delete;

  const SignBranchConfig& config() const { return cfg_; }
  VisualBackbone visual;
  AdaPM adapm;
  Estimator estimator;

  nn::ParamList params();

 private:
  SignBranchConfig cfg_;
};

struct GeneratorOutput {
  tts::PhonemeLatents latents;
  tts::VarianceOutput phoneme;  // frozen phoneme-path predictions
  AdaPMOutput adapm;
  std::vector<int> durations;
  Var mel;  // N x B
};

// Full sign-conditioned synthesis for one (text, clip, speaker).
GeneratorOutput generate(const tts::Backbone& backbone, const SignBranch& branch,
                         nn::Binder& b, const corpus::PhonemeSequence& text,
                         const KeypointSequence& clip, int speaker);

}  // namespace s2p::sign

#endif  // S2P_SIGN_BRANCH_H_
