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

#include "s2p/config.h"

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "s2p/errors.h"

namespace s2p::config {

namespace {

// Reads fields from one JSON object and rejects any key never asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  const json* section(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename E>
  void get_enum(const char* key, E& out,
                std::initializer_list<std::pair<const char*, E>> names) {
    std::string s;
    get(key, s);
    if (s.empty()) return;
    for (const auto& [name, value] : names) {
      if (s == name) {
        out = value;
        return;
      }
    }
    throw ConfigError(where_ + "." + key + ": unknown value '" + s + "'");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
      }
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

const char* name_of(losses::DiscConvention c) {
  return c == losses::DiscConvention::kLsgan ? "lsgan" : "paper";
}
const char* name_of(losses::IrDirection d) {
  return d == losses::IrDirection::kFormula ? "formula" : "prose";
}
const char* name_of(sign::AdapmChannels c) {
  return c == sign::AdapmChannels::kAll ? "all" : "pitch_energy";
}
const char* name_of(sign_prosody::Normalization n) {
  return n == sign_prosody::Normalization::kPerClip ? "per_clip" : "corpus";
}

json weights_json(const losses::LossWeights& w) {
  return {{"lambda_weight", w.lambda_weight}, {"lambda_ir", w.lambda_ir},
          {"lambda_sl", w.lambda_sl},         {"lambda_signrec", w.lambda_signrec},
          {"lambda_promo", w.lambda_promo},   {"margin", w.margin}};
}

losses::LossWeights weights_from(const json& j, const std::string& where) {
  losses::LossWeights w;
  Reader r(j, where);
  r.get("lambda_weight", w.lambda_weight);
  r.get("lambda_ir", w.lambda_ir);
  r.get("lambda_sl", w.lambda_sl);
  r.get("lambda_signrec", w.lambda_signrec);
  r.get("lambda_promo", w.lambda_promo);
  r.get("margin", w.margin);
  r.finish();
  return w;
}

json sign_branch_json(const sign::SignBranchConfig& s) {
  return {{"width", s.width},
          {"heads", s.heads},
          {"ffn_hidden", s.ffn_hidden},
          {"graph_channels", s.graph_channels},
          {"temporal_channels", s.temporal_channels},
          {"short_kernel", s.short_kernel},
          {"long_kernel", s.long_kernel},
          {"estimator_channels", s.estimator_channels},
          {"bins", s.bins},
          {"adapm_channels", name_of(s.adapm_channels)},
          {"shoulder_tolerance", s.shoulder_tolerance}};
}

sign::SignBranchConfig sign_branch_from(const json& j, const std::string& where) {
  sign::SignBranchConfig s;
  Reader r(j, where);
  r.get("width", s.width);
  r.get("heads", s.heads);
  r.get("ffn_hidden", s.ffn_hidden);
  r.get("graph_channels", s.graph_channels);
  r.get("temporal_channels", s.temporal_channels);
  r.get("short_kernel", s.short_kernel);
  r.get("long_kernel", s.long_kernel);
  r.get("estimator_channels", s.estimator_channels);
  r.get("bins", s.bins);
  r.get_enum("adapm_channels", s.adapm_channels,
             {{"all", sign::AdapmChannels::kAll},
              {"pitch_energy", sign::AdapmChannels::kPitchEnergy}});
  r.get("shoulder_tolerance", s.shoulder_tolerance);
  r.finish();
  return s;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const json& j) { return fnv1a64(std::string_view(j.dump())); }

json to_json(const corpus::CorpusConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"mel_bins", c.mel_bins},
          {"max_text_length", c.max_text_length},
          {"min_frames", c.min_frames},
          {"max_frames", c.max_frames},
          {"clip_min_frames", c.clip_min_frames},
          {"clip_max_frames", c.clip_max_frames},
          {"lexicon_size", c.lexicon_size},
          {"min_words", c.min_words},
          {"max_words", c.max_words},
          {"language_seed", c.language_seed}};
}

corpus::CorpusConfig corpus_from_json(const json& j) {
  corpus::CorpusConfig c;
  Reader r(j, "corpus.generator");
  r.get("vocab_size", c.vocab_size);
  r.get("mel_bins", c.mel_bins);
  r.get("max_text_length", c.max_text_length);
  r.get("min_frames", c.min_frames);
  r.get("max_frames", c.max_frames);
  r.get("clip_min_frames", c.clip_min_frames);
  r.get("clip_max_frames", c.clip_max_frames);
  r.get("lexicon_size", c.lexicon_size);
  r.get("min_words", c.min_words);
  r.get("max_words", c.max_words);
  r.get("language_seed", c.language_seed);
  r.finish();
  c.validate();
  return c;
}

json to_json(const tts::BackboneConfig& c) {
  return {{"vocab_size", c.vocab_size},         {"width", c.width},
          {"heads", c.heads},                   {"ffn_hidden", c.ffn_hidden},
          {"conv_kernel", c.conv_kernel},       {"encoder_blocks", c.encoder_blocks},
          {"decoder_blocks", c.decoder_blocks}, {"variance_hidden", c.variance_hidden},
          {"embed_bins", c.embed_bins},         {"mel_bins", c.mel_bins},
          {"n_speakers", c.n_speakers}};
}

tts::BackboneConfig backbone_from_json(const json& j) {
  tts::BackboneConfig c;
  Reader r(j, "backbone.model");
  r.get("vocab_size", c.vocab_size);
  r.get("width", c.width);
  r.get("heads", c.heads);
  r.get("ffn_hidden", c.ffn_hidden);
  r.get("conv_kernel", c.conv_kernel);
  r.get("encoder_blocks", c.encoder_blocks);
  r.get("decoder_blocks", c.decoder_blocks);
  r.get("variance_hidden", c.variance_hidden);
  r.get("embed_bins", c.embed_bins);
  r.get("mel_bins", c.mel_bins);
  r.get("n_speakers", c.n_speakers);
  r.finish();
  c.validate();
  return c;
}

json to_json(const train::TrainConfig& c) {
  return {{"weights", weights_json(c.weights)},
          {"generator_lr", c.generator_lr},
          {"discriminator_lr", c.discriminator_lr},
          {"generator_weight_decay", c.generator_weight_decay},
          {"discriminator_weight_decay", c.discriminator_weight_decay},
          {"batch_size", c.batch_size},
          {"steps", c.steps},
          {"seed", c.seed},
          {"train_fraction", c.train_fraction},
          {"use_natural", c.use_natural},
          {"use_signrec", c.use_signrec},
          {"use_promo", c.use_promo},
          {"disc_convention", name_of(c.disc_convention)},
          {"ir_direction", name_of(c.ir_direction)},
          {"label_normalization", name_of(c.label_normalization)},
          {"sign_branch", sign_branch_json(c.sign_branch)},
          {"discriminator",
           {{"channels", c.discriminator.channels},
            {"kernel", c.discriminator.kernel},
            {"crop_frames", c.discriminator.crop_frames},
            {"instance_noise", c.discriminator.instance_noise}}},
          {"checkpoint_every", c.checkpoint_every}};
}

train::TrainConfig train_from_json(const json& j) {
  train::TrainConfig c;
  Reader r(j, "train");
  if (const json* w = r.section("weights")) c.weights = weights_from(*w, "train.weights");
  r.get("generator_lr", c.generator_lr);
  r.get("discriminator_lr", c.discriminator_lr);
  r.get("generator_weight_decay", c.generator_weight_decay);
  r.get("discriminator_weight_decay", c.discriminator_weight_decay);
  r.get("batch_size", c.batch_size);
  r.get("steps", c.steps);
  r.get("seed", c.seed);
  r.get("train_fraction", c.train_fraction);
  r.get("use_natural", c.use_natural);
  r.get("use_signrec", c.use_signrec);
  r.get("use_promo", c.use_promo);
  r.get_enum("disc_convention", c.disc_convention,
             {{"lsgan", losses::DiscConvention::kLsgan},
              {"paper", losses::DiscConvention::kInverted}});
  r.get_enum("ir_direction", c.ir_direction,
             {{"formula", losses::IrDirection::kFormula},
              {"prose", losses::IrDirection::kProse}});
  r.get_enum("label_normalization", c.label_normalization,
             {{"per_clip", sign_prosody::Normalization::kPerClip},
              {"corpus", sign_prosody::Normalization::kCorpus}});
  if (const json* s = r.section("sign_branch")) {
    c.sign_branch = sign_branch_from(*s, "train.sign_branch");
  }
  if (const json* d = r.section("discriminator")) {
    Reader dr(*d, "train.discriminator");
    dr.get("channels", c.discriminator.channels);
    dr.get("kernel", c.discriminator.kernel);
    dr.get("crop_frames", c.discriminator.crop_frames);
    dr.get("instance_noise", c.discriminator.instance_noise);
    dr.finish();
  }
  r.get("checkpoint_every", c.checkpoint_every);
  r.finish();
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  return {{"corpus",
           {{"generator", to_json(c.corpus.corpus)},
            {"n_clips", c.corpus.n_clips},
            {"n_utterances", c.corpus.n_utterances},
            {"n_speakers", c.corpus.n_speakers},
            {"seed", c.corpus.seed}}},
          {"backbone",
           {{"model", to_json(c.backbone.model)},
            {"pretrain_steps", c.backbone.pretrain_steps},
            {"batch_size", c.backbone.batch_size},
            {"learning_rate", c.backbone.learning_rate},
            {"seed", c.backbone.seed}}},
          {"train", to_json(c.train)},
          {"eval", {{"plot_clips", c.eval.plot_clips}}}};
}

RunConfig run_from_json(const json& j) {
  RunConfig c;
  Reader r(j, "config");
  if (const json* s = r.section("corpus")) {
    Reader cr(*s, "corpus");
    if (const json* g = cr.section("generator")) c.corpus.corpus = corpus_from_json(*g);
    cr.get("n_clips", c.corpus.n_clips);
    cr.get("n_utterances", c.corpus.n_utterances);
    cr.get("n_speakers", c.corpus.n_speakers);
    cr.get("seed", c.corpus.seed);
    cr.finish();
  }
  if (const json* s = r.section("backbone")) {
    Reader br(*s, "backbone");
    if (const json* m = br.section("model")) c.backbone.model = backbone_from_json(*m);
    br.get("pretrain_steps", c.backbone.pretrain_steps);
    br.get("batch_size", c.backbone.batch_size);
    br.get("learning_rate", c.backbone.learning_rate);
    br.get("seed", c.backbone.seed);
    br.finish();
  }
  if (const json* s = r.section("train")) c.train = train_from_json(*s);
  if (const json* s = r.section("eval")) {
    Reader er(*s, "eval");
    er.get("plot_clips", c.eval.plot_clips);
    er.finish();
  }
  r.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_from_json(j);
}

void RunConfig::validate() const {
  corpus.corpus.validate();
  backbone.model.validate();
  train.validate();
  if (corpus.n_clips < 4) throw ConfigError("corpus.n_clips must be >= 4");
  if (corpus.n_utterances < 1) throw ConfigError("corpus.n_utterances must be >= 1");
  if (corpus.n_speakers < 1) throw ConfigError("corpus.n_speakers must be >= 1");
  if (backbone.model.vocab_size != corpus.corpus.vocab_size) {
    throw ConfigError("backbone.model.vocab_size must equal corpus vocab_size");
  }
  if (backbone.model.mel_bins != corpus.corpus.mel_bins) {
    throw ConfigError("backbone.model.mel_bins must equal corpus mel_bins");
  }
  if (backbone.model.n_speakers < corpus.n_speakers) {
    throw ConfigError("backbone.model.n_speakers must cover corpus.n_speakers");
  }
  if (train.sign_branch.width != backbone.model.width) {
    throw ConfigError("train.sign_branch.width must equal backbone.model.width");
  }
  if (backbone.pretrain_steps < 0 || backbone.batch_size < 1 ||
      !(backbone.learning_rate > 0.0)) {
    throw ConfigError("backbone pretraining settings out of range");
  }
  if (eval.plot_clips < 0) throw ConfigError("eval.plot_clips must be >= 0");
}

void RunConfig::set_seed(std::uint64_t seed) {
  corpus.seed = seed;
  backbone.seed = seed;
  train.seed = seed;
}

}  // namespace s2p::config
