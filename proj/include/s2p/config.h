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

// JSON run configuration. Readers reject unknown keys; absent keys keep
// their defaults. Writers always emit every field.

#ifndef S2P_CONFIG_H_
#define S2P_CONFIG_H_

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "s2p/corpus.h"
#include "s2p/tts_backbone.h"

namespace s2p::train {
struct TrainConfig;
}

namespace s2p::config {

using nlohmann::json;

struct CorpusSection {
  corpus::CorpusConfig corpus;
  int n_clips = 200;
  int n_utterances = 200;
  int n_speakers = 2;
  std::uint64_t seed = 0;
};

struct BackboneSection {
  tts::BackboneConfig model;
  int pretrain_steps = 2000;
  int batch_size = 8;
  double learning_rate = 2e-3;
  std::uint64_t seed = 0;
};

struct EvalSection {
  int plot_clips = 2;
};

struct RunConfig;

// 64-bit FNV-1a of the sorted-key, whitespace-free serialization.
std::uint64_t fnv1a64(const json& j);
std::uint64_t fnv1a64(std::string_view bytes);

json to_json(const corpus::CorpusConfig& c);
json to_json(const tts::BackboneConfig& c);
json to_json(const train::TrainConfig& c);
json to_json(const RunConfig& c);

corpus::CorpusConfig corpus_from_json(const json& j);
tts::BackboneConfig backbone_from_json(const json& j);
train::TrainConfig train_from_json(const json& j);
RunConfig run_from_json(const json& j);

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace s2p::config

#include "s2p/trainer.h"

namespace s2p::config {

struct RunConfig {
  CorpusSection corpus;
  BackboneSection backbone;
  train::TrainConfig train;
  EvalSection eval;

  // Cross-section consistency (vocabulary, mel bins, widths, speakers).
  void validate() const;
  // Overrides every section's seed.
  void set_seed(std::uint64_t seed);
  std::uint64_t hash() const { return fnv1a64(to_json(*this)); }
};

}  // namespace s2p::config

#endif  // S2P_CONFIG_H_
