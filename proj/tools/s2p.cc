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

// s2p: command-line entry point for corpus generation, backbone
// pretraining, sign-conditioned training, synthesis and evaluation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "s2p/config.h"
#include "s2p/corpus.h"
#include "s2p/errors.h"
#include "s2p/evaluation.h"
#include "s2p/gradcheck.h"
#include "s2p/sign_branch.h"
#include "s2p/sign_prosody.h"
#include "s2p/trainer.h"
#include "s2p/tts_backbone.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

constexpr char kSignFile[] = "sign.jsonl";
constexpr char kSpeechFile[] = "speech.jsonl";
constexpr char kBackboneFile[] = "backbone.srg";
constexpr char kFinalCheckpoint[] = "final.srg";

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct Inputs {
  std::string data;        // directory holding sign.jsonl / speech.jsonl
  std::string backbone;    // pretrained backbone checkpoint
  std::string checkpoint;  // train-state checkpoint
};

void add_common(CLI::App* cmd, Common& c, bool need_out = true) {
  cmd->add_option("--config", c.config, "RunConfig JSON; defaults apply when omitted")
      ->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", c.out, "output directory; every file lands here");
  if (need_out) out->required();
  cmd->add_option("--seed", c.seed, "overrides every seed in the config");
}

s2p::config::RunConfig load_config(const Common& c) {
  s2p::config::RunConfig rc;
  if (!c.config.empty()) rc = s2p::config::load_run_config(c.config);
  if (c.seed) rc.set_seed(*c.seed);
  rc.validate();
  return rc;
}

fs::path out_dir(const Common& c) {
  fs::path p(c.out);
  fs::create_directories(p);
  return p;
}

fs::path data_dir(const Inputs& in, const Common& c) {
  return in.data.empty() ? fs::path(c.out) : fs::path(in.data);
}

fs::path require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) {
    throw s2p::ConfigError(what + " not found: " + p.string());
  }
  return p;
}

std::vector<s2p::corpus::KeypointSequence> read_sign(const fs::path& dir,
                                                     const s2p::config::RunConfig& rc) {
  return s2p::corpus::read_sign_corpus(require_file(dir / kSignFile, "sign corpus"),
                                       rc.corpus.corpus.vocab_size);
}

std::vector<s2p::corpus::SpeechUtterance> read_speech(const fs::path& dir,
                                                      const s2p::config::RunConfig& rc) {
  return s2p::corpus::read_speech_corpus(require_file(dir / kSpeechFile, "speech corpus"),
                                         rc.corpus.corpus.vocab_size);
}

fs::path backbone_path(const Inputs& in, const Common& c) {
  return in.backbone.empty() ? data_dir(in, c) / kBackboneFile : fs::path(in.backbone);
}

fs::path checkpoint_path(const Inputs& in, const Common& c) {
  return in.checkpoint.empty() ? fs::path(c.out) / kFinalCheckpoint
                               : fs::path(in.checkpoint);
}

std::unique_ptr<s2p::train::TrainState> load_state(const Inputs& in, const Common& c) {
  return s2p::train::load_checkpoint(require_file(checkpoint_path(in, c), "checkpoint"));
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw s2p::Error("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

json contours_json(const s2p::ProsodyContours& c) {
  return {{"pitch", c.pitch},
          {"energy", c.energy},
          {"log_duration", c.log_duration},
          {"durations", c.durations}};
}

s2p::corpus::PhonemeSequence parse_text(const std::string& s, int vocab) {
  s2p::corpus::PhonemeSequence text;
  text.vocab_size = vocab;
  std::string cleaned = s;
  for (char& ch : cleaned) {
    if (ch == ',') ch = ' ';
  }
  std::istringstream is(cleaned);
  int id = 0;
  while (is >> id) text.ids.push_back(id);
  if (!is.eof()) throw s2p::ParseError("--text: expected integers, got '" + s + "'");
  return text;
}

// ---- subcommands ----

int gen_corpus(const Common& c) {
  const auto rc = load_config(c);
  const fs::path out = out_dir(c);
  const auto& cs = rc.corpus;
  const auto sign = s2p::corpus::gen_sign_corpus(cs.n_clips, cs.seed, cs.corpus);
  const auto speech =
      s2p::corpus::gen_speech_corpus(cs.n_utterances, cs.n_speakers, cs.seed, cs.corpus);
  s2p::corpus::write_sign_corpus(sign, out / kSignFile);
  s2p::corpus::write_speech_corpus(speech, out / kSpeechFile);
  std::cout << "wrote " << sign.size() << " clips and " << speech.size()
            << " utterances to " << out.string() << "\n";
  return kExitOk;
}

int extract_labels(const Common& c, const Inputs& in) {
  const auto rc = load_config(c);
  const fs::path out = out_dir(c);
  const auto sign = read_sign(data_dir(in, c), rc);
  s2p::sign_prosody::LabelOptions opts;
  opts.bins = rc.train.sign_branch.bins;
  opts.normalization = rc.train.label_normalization;
  if (opts.normalization == s2p::sign_prosody::Normalization::kCorpus) {
    opts.corpus_max = s2p::sign_prosody::corpus_motion_max(sign);
  }
  std::ofstream f(out / "labels.jsonl");
  if (!f) throw s2p::Error("cannot write labels.jsonl");
  for (const auto& clip : sign) {
    const auto label = s2p::sign_prosody::prosody_label(clip, opts);
    json p = json::object();
    for (int ch = 0; ch < s2p::sign_prosody::kNumChannels; ++ch) {
      p[std::string(s2p::sign_prosody::kChannelNames[ch])] = label.histograms[ch];
    }
    f << json{{"clip_id", clip.clip_id}, {"S", label.bins}, {"T", label.raw_length},
              {"P", p}}.dump()
      << "\n";
  }
  std::cout << "wrote " << sign.size() << " labels\n";
  return kExitOk;
}

int pretrain(const Common& c, const Inputs& in) {
  const auto rc = load_config(c);
  const fs::path out = out_dir(c);
  const auto speech = read_speech(data_dir(in, c), rc);
  s2p::tts::Backbone backbone(rc.backbone.model, rc.backbone.seed);
  s2p::tts::PretrainOptions po;
  po.steps = rc.backbone.pretrain_steps;
  po.batch_size = rc.backbone.batch_size;
  po.learning_rate = rc.backbone.learning_rate;
  po.seed = rc.backbone.seed;
  std::ofstream log(out / "pretrain.jsonl");
  po.on_step = [&](int step, double loss) {
    log << json{{"step", step}, {"loss", loss}}.dump() << "\n";
    if (step % 200 == 0) std::cerr << "pretrain step " << step << " loss " << loss << "\n";
  };
  const auto result = s2p::tts::pretrain_backbone(backbone, speech, po);
  backbone.save(out / kBackboneFile);
  std::cout << "mel error " << result.initial_mel_error << " -> " << result.final_mel_error
            << "\n";
  return kExitOk;
}

int train_cmd(const Common& c, const Inputs& in, const std::string& resume) {
  const auto rc = load_config(c);
  const fs::path out = out_dir(c);
  const fs::path data = data_dir(in, c);
  auto sign = read_sign(data, rc);
  auto speech = read_speech(data, rc);
  std::unique_ptr<s2p::train::TrainState> state;
  if (!resume.empty()) {
    state = s2p::train::load_checkpoint(require_file(resume, "resume checkpoint"), &rc.train);
  } else {
    auto backbone = s2p::tts::Backbone::load(require_file(backbone_path(in, c), "backbone"));
    state = std::make_unique<s2p::train::TrainState>(rc.train, std::move(backbone));
  }
  const auto train_data = s2p::train::prepare_data(std::move(sign), std::move(speech), rc.train);
  s2p::train::TrainOptions opts;
  opts.metrics_path = out / "metrics.jsonl";
  opts.checkpoint_dir = out / "checkpoints";
  opts.on_step = [](const json& r) {
    const int step = r.at("step").get<int>();
    if (step % 50 == 0) std::cerr << "step " << step << " " << r.dump() << "\n";
  };
  s2p::train::train(*state, train_data, opts);
  s2p::train::save_checkpoint(*state, out / kFinalCheckpoint);
  std::cout << "trained to step " << state->step() << "\n";
  return kExitOk;
}

int synthesize(const Common& c, const Inputs& in, const std::string& clip_id,
               const std::string& text_arg, int speaker, const std::string& name) {
  const auto rc = load_config(c);
  const fs::path out = out_dir(c);
  const auto state = load_state(in, c);
  const auto sign = read_sign(data_dir(in, c), rc);
  const s2p::corpus::KeypointSequence* clip = nullptr;
  for (const auto& k : sign) {
    if (k.clip_id == clip_id) clip = &k;
  }
  if (clip == nullptr) throw s2p::ConfigError("no clip with id '" + clip_id + "'");
  const auto text = text_arg.empty()
                        ? clip->text
                        : parse_text(text_arg, state->backbone().config().vocab_size);
  s2p::nn::Binder b;
  const auto g = s2p::sign::generate(state->backbone(), state->branch(), b, text, *clip, speaker);
  s2p::corpus::MelSpectrogram mel;
  mel.values = g.mel.value();
  s2p::corpus::write_mel(mel, out / (name + ".mel"));
  json j = contours_json(s2p::tts::to_contours(g.adapm.mixed));
  j["clip_id"] = clip->clip_id;
  j["speaker"] = speaker;
  j["w_sign"] = g.adapm.w_sign.scalar();
  j["frames"] = mel.frames();
  write_json(j, out / (name + ".json"));
  std::cout << "wrote " << (out / (name + ".mel")).string() << " (" << mel.frames()
            << " frames)\n";
  return kExitOk;
}

int evaluate(const Common& c, const Inputs& in) {
  const auto rc = load_config(c);
  const fs::path out = out_dir(c);
  const auto state = load_state(in, c);
  const fs::path data = data_dir(in, c);
  const auto train_data =
      s2p::train::prepare_data(read_sign(data, rc), read_speech(data, rc), state->config());
  const auto full = s2p::eval::contours_of(
      s2p::eval::synthesize_clips(*state, train_data.test_clips, train_data.n_speakers));
  const auto base = s2p::eval::contours_of(s2p::eval::two_stage_clips(
      state->backbone(), train_data.test_clips, train_data.n_speakers));
  json body;
  body["step"] = state->step();
  body["system"] = s2p::eval::expressiveness(full).to_json();
  body["two_stage"] = s2p::eval::expressiveness(base).to_json();
  body["arousal_contrast"] = s2p::eval::arousal_contrast(full, train_data.test_clips).to_json();
  s2p::eval::write_report(body, out / "eval.json");
  std::cout << body.dump(2) << "\n";
  return kExitOk;
}

int ablate(const Common& c, const Inputs& in) {
  const auto rc = load_config(c);
  const fs::path out = out_dir(c);
  const fs::path data = data_dir(in, c);
  const auto train_data =
      s2p::train::prepare_data(read_sign(data, rc), read_speech(data, rc), rc.train);
  const auto backbone = s2p::tts::Backbone::load(require_file(backbone_path(in, c), "backbone"));
  const auto rows = s2p::eval::ablation_suite(rc.train, *backbone, train_data);
  json body;
  body["rows"] = json::array();
  for (const auto& r : rows) body["rows"].push_back(r.to_json());
  s2p::eval::write_report(body, out / "ablation.json");
  const std::string table = s2p::eval::format_ablation_table(rows);
  std::ofstream(out / "ablation.txt") << table;
  std::cout << table;
  return kExitOk;
}

int plot(const Common& c, const Inputs& in) {
  const auto rc = load_config(c);
  const fs::path out = out_dir(c) / "plots";
  fs::create_directories(out);
  const auto state = load_state(in, c);
  const fs::path data = data_dir(in, c);
  const auto train_data =
      s2p::train::prepare_data(read_sign(data, rc), read_speech(data, rc), state->config());
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(rc.eval.plot_clips),
                                              train_data.test_clips.size());
  const std::vector<s2p::corpus::KeypointSequence> clips(train_data.test_clips.begin(),
                                                         train_data.test_clips.begin() + n);
  const auto full = s2p::eval::synthesize_clips(*state, clips, train_data.n_speakers);
  const auto base = s2p::eval::two_stage_clips(state->backbone(), clips, train_data.n_speakers);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = clips[i].clip_id;
    s2p::eval::plot_mel(full[i].mel, out / (id + "_mel.png"));
    s2p::eval::plot_mel(base[i].mel, out / (id + "_mel_two_stage.png"));
    s2p::eval::plot_contours(full[i].contours, base[i].contours, out / (id + "_contours.png"));
  }
  std::cout << "wrote " << 3 * n << " images to " << out.string() << "\n";
  return kExitOk;
}

int gradcheck(const Common& c) {
  s2p::gradcheck::Options opts;
  if (c.seed) opts.seed = *c.seed;
  const auto results = s2p::gradcheck::run_suite(opts);
  const std::string table = s2p::gradcheck::format_results(results);
  std::cout << table;
  if (!c.out.empty()) std::ofstream(out_dir(c) / "gradcheck.txt") << table;
  for (const auto& r : results) {
    if (!r.passed) return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"s2p: sign-conditioned expressive speech synthesis on synthetic corpora"};
  app.require_subcommand(1);

  Common common;
  Inputs inputs;
  auto add_data = [&](CLI::App* cmd) {
    cmd->add_option("--data", inputs.data, "directory with sign.jsonl/speech.jsonl (default: --out)");
  };
  auto add_backbone = [&](CLI::App* cmd) {
    cmd->add_option("--backbone", inputs.backbone, "pretrained backbone (default: <data>/backbone.srg)");
  };
  auto add_checkpoint = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", inputs.checkpoint, "train checkpoint (default: <out>/final.srg)");
  };

  auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic sign and speech corpora");
  add_common(gen, common);

  auto* labels = app.add_subcommand("extract-labels", "sign prosody histograms as JSON Lines");
  add_common(labels, common);
  add_data(labels);

  auto* pre = app.add_subcommand("pretrain-backbone", "supervised pretraining of the TTS backbone");
  add_common(pre, common);
  add_data(pre);

  std::string resume;
  auto* tr = app.add_subcommand("train", "adversarial training of the sign branch");
  add_common(tr, common);
  add_data(tr);
  add_backbone(tr);
  tr->add_option("--resume", resume, "continue from a train checkpoint");

  std::string clip_id, text;
  std::string name = "synth";
  int speaker = 0;
  auto* syn = app.add_subcommand("synthesize", "text + sign clip -> mel + contours");
  add_common(syn, common);
  add_data(syn);
  add_checkpoint(syn);
  syn->add_option("--clip", clip_id, "clip id in the sign corpus")->required();
  syn->add_option("--text", text, "phoneme ids, space or comma separated (default: clip text)");
  syn->add_option("--speaker", speaker, "target speaker id")->check(CLI::NonNegativeNumber);
  syn->add_option("--name", name, "output file stem");

  auto* ev = app.add_subcommand("evaluate", "expressiveness and arousal contrast report");
  add_common(ev, common);
  add_data(ev);
  add_checkpoint(ev);

  auto* ab = app.add_subcommand("ablate", "train every loss-toggle row and tabulate");
  add_common(ab, common);
  add_data(ab);
  add_backbone(ab);

  auto* pl = app.add_subcommand("plot", "mel heatmaps and contour overlays for test clips");
  add_common(pl, common);
  add_data(pl);
  add_checkpoint(pl);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  add_common(gc, common, /*need_out=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gen) return gen_corpus(common);
    if (*labels) return extract_labels(common, inputs);
    if (*pre) return pretrain(common, inputs);
    if (*tr) return train_cmd(common, inputs, resume);
    if (*syn) return synthesize(common, inputs, clip_id, text, speaker, name);
    if (*ev) return evaluate(common, inputs);
    if (*ab) return ablate(common, inputs);
    if (*pl) return plot(common, inputs);
    if (*gc) return gradcheck(common);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  std::cerr << app.help();
  return kExitUsage;
}
