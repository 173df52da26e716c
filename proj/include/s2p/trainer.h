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

// Adversarial training over unpaired sign and speech corpora.

#ifndef S2P_TRAINER_H_
#define S2P_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2p/corpus.h"
#include "s2p/losses.h"
#include "s2p/nn.h"
#include "s2p/sign_branch.h"
#include "s2p/sign_prosody.h"
#include "s2p/tts_backbone.h"

namespace s2p::train {

using ag::Matrix;
using ag::Var;

struct DiscriminatorConfig {
  int channels = 32;
  int kernel = 5;
  int crop_frames = 64;
  // Std of Gaussian noise added to the valid rows of every crop the
  // discriminator sees, real or generated. 0 disables.
  double instance_noise = 0.5;
};

// Three stride-2 convolutions with leaky ReLU, masked mean pooling and a
// linear scorer. Input crops are crop_frames x B.
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, int mel_bins, std::uint64_t seed);
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;

  // `valid_frames` leading rows of `crop` hold real content; the rest are
  // zero padding and are excluded from pooling.
  Var operator()(nn::Binder& b, const Var& crop, int valid_frames) const;

  const DiscriminatorConfig& config() const { return cfg_; }
  nn::ParamList params();
  // Final scorer; exposed for tests that pin the output.
  nn::Linear& scorer() { return out_; }

 private:
  DiscriminatorConfig cfg_;
  nn::Conv1d conv1_, conv2_, conv3_;
  nn::Linear out_;
};

struct Crop {
  Var frames;  // crop_frames x B
  int valid = 0;
};

// Takes `length` rows from `offset` (zero-padding past the end).
Crop crop_mel(const Var& mel, int offset, int length);
// Adds N(0, sigma^2) to the valid rows; padding stays zero.
Crop add_instance_noise(Crop crop, double sigma, std::mt19937_64& rng);
// Uniform offset over all full-length windows; 0 for short mels.
int sample_crop_offset(int n_frames, int length, std::mt19937_64& rng);

struct TrainConfig {
  losses::LossWeights weights;
  double generator_lr = 3e-4;
  double discriminator_lr = 1e-4;
  double generator_weight_decay = 0.01;
  double discriminator_weight_decay = 0.01;
  int batch_size = 8;
  int steps = 500;
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  bool use_natural = true;
  bool use_signrec = true;
  bool use_promo = true;
  losses::DiscConvention disc_convention = losses::DiscConvention::kLsgan;
  losses::IrDirection ir_direction = losses::IrDirection::kFormula;
  sign_prosody::Normalization label_normalization =
      sign_prosody::Normalization::kPerClip;
  sign::SignBranchConfig sign_branch;
  DiscriminatorConfig discriminator;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints

  void validate() const;
  // Canonical JSON of everything that affects the training trajectory
  // (excludes steps and checkpointing cadence).
  nlohmann::json trajectory_json() const;
  std::uint64_t hash() const;
};

// Inputs shared by every step; read-only once built.
struct TrainData {
  std::vector<corpus::KeypointSequence> train_clips;
  std::vector<corpus::KeypointSequence> test_clips;
  std::vector<sign_prosody::SignProsodyLabel> labels;  // per train clip
  sign_prosody::MotionStats motion;                    // over train clips
  std::vector<corpus::SpeechUtterance> speech;
  std::map<int, corpus::SpeakerStats> speakers;
  int n_speakers = 1;
};

// Splits the sign corpus (first train_fraction for training) and derives
// labels, motion statistics and speaker statistics.
TrainData prepare_data(std::vector<corpus::KeypointSequence> sign_corpus,
                       std::vector<corpus::SpeechUtterance> speech_corpus,
                       const TrainConfig& cfg);

class TrainState {
 public:
  // Takes ownership of a pretrained backbone and freezes it.
  TrainState(const TrainConfig& cfg, std::unique_ptr<tts::Backbone> backbone);
  TrainState(const TrainState&) = delete;
  TrainState& operator=(const TrainState&) = delete;

  const TrainConfig& config() const { return cfg_; }
  tts::Backbone& backbone() { return *backbone_; }
  const tts::Backbone& backbone() const { return *backbone_; }
  sign::SignBranch& branch() { return *branch_; }
  const sign::SignBranch& branch() const { return *branch_; }
  Discriminator& discriminator() { return *disc_; }
  nn::AdamW& generator_optimizer() { return gen_opt_; }
  nn::AdamW& discriminator_optimizer() { return disc_opt_; }
  std::mt19937_64& rng() { return rng_; }
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }
  std::uint64_t config_hash() const { return hash_; }

  bool any_generator_loss() const {
    return cfg_.use_natural || cfg_.use_signrec || cfg_.use_promo;
  }

 private:
  TrainConfig cfg_;
  std::unique_ptr<tts::Backbone> backbone_;
  std::unique_ptr<sign::SignBranch> branch_;
  std::unique_ptr<Discriminator> disc_;
  nn::AdamW gen_opt_;
  nn::AdamW disc_opt_;
  std::mt19937_64 rng_;
  std::int64_t step_ = 0;
  std::uint64_t hash_ = 0;
};

// Batch of train-clip indices and speaker ids for one generator step.
struct SignBatch {
  std::vector<int> clips;
  std::vector<int> speakers;
};
SignBatch sample_sign_batch(TrainState& state, const TrainData& data);

struct RealBatch {
  std::vector<int> utterances;
};
RealBatch sample_real_batch(TrainState& state, const TrainData& data);

// Forward + backward over the batch and one optimizer step on the sign
// branch. Throws TrainingError naming the first non-finite component.
losses::LossReport generator_step(TrainState& state, const TrainData& data,
                                  const SignBatch& batch);

losses::LossReport discriminator_step(TrainState& state, const TrainData& data,
                                      const RealBatch& real, const SignBatch& fake);

struct TrainOptions {
  std::filesystem::path metrics_path;     // JSONL; empty to skip
  std::filesystem::path checkpoint_dir;   // for periodic checkpoints
  std::function<void(const nlohmann::json&)> on_step;
};

// Runs generator/discriminator steps until state.step() == cfg.steps and
// returns one metrics record per step executed.
std::vector<nlohmann::json> train(TrainState& state, const TrainData& data,
                                  const TrainOptions& options = {});

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
// Rebuilds the state; when `expected` is given its hash must match the
// stored one.
std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path,
                                            const TrainConfig* expected = nullptr);

}  // namespace s2p::train

#endif  // S2P_TRAINER_H_
