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

// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "s2p/config.h"
#include "s2p/corpus.h"
#include "s2p/evaluation.h"
#include "s2p/gradcheck.h"
#include "s2p/losses.h"
#include "s2p/sign_branch.h"
#include "s2p/sign_prosody.h"
#include "s2p/trainer.h"
#include "s2p/tts_backbone.h"

namespace {

using namespace s2p;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int failures = 0;

void verdict(const std::string& id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << id << "  " << detail << std::endl;
}

// ---------------------------------------------------------------------------
// 1. Loss oracles.

struct OracleSet {
  double worst = 0.0;
  std::string worst_name;
  int count = 0;

  void check(const std::string& name, double got, double want) {
    ++count;
    const double err = std::isfinite(got) ? std::abs(got - want) : 1e300;
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  }
};

sign_prosody::SignProsodyLabel label_all(std::vector<double> h) {
  sign_prosody::SignProsodyLabel l;
  l.bins = static_cast<int>(h.size());
  for (auto& c : l.histograms) c = h;
  return l;
}

std::array<std::vector<double>, 4> four(std::vector<double> v) { return {v, v, v, v}; }

// Direct evaluation of the cross-entropy sum, independent of the library.
double ce_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] != 0.0) s -= p[k] * std::log(std::max(q[k], 1e-12));
  }
  return s;  // four identical channels averaged over four
}

double hinge(double x) { return x > 0.0 ? x : 0.0; }

void criterion_1() {
  const auto t0 = Clock::now();
  OracleSet o;
  using namespace losses;
  // Weight.
  for (double w : {1.0, 0.0, 0.7, 0.25}) {
    o.check("weight", weight_loss(w), std::abs(1.0 - w));
    o.check("weight/var", weight_loss(ag::constant(w)).scalar(), std::abs(1.0 - w));
  }
  o.check("weight 0.7", weight_loss(0.7), 0.3);
  // SignRec.
  o.check("signrec one-hot", signrec_loss(label_all({1, 0, 0}), four({1, 0, 0})), 0.0);
  o.check("signrec [1,0]/[0.8,0.2]", signrec_loss(label_all({1, 0}), four({0.8, 0.2})),
          -std::log(0.8));
  o.check("signrec ref", signrec_loss(label_all({1, 0}), four({0.8, 0.2})),
          0.22314355131420976);
  o.check("signrec mass ratio",
          signrec_loss(label_all({2.0 / 3.0, 0}), four({0.8, 0.2})) /
              signrec_loss(label_all({1, 0}), four({0.8, 0.2})),
          2.0 / 3.0);
  {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int i = 0; i < 20; ++i) {
      std::vector<double> p(6), q(6);
      double qs = 0.0;
      for (int k = 0; k < 6; ++k) {
        p[k] = k % 3 == 0 ? 0.0 : u(rng) / 6.0;
        q[k] = u(rng);
        qs += q[k];
      }
      for (double& x : q) x /= qs;
      o.check("signrec random", signrec_loss(label_all(p), four(q)), ce_oracle(p, q));
    }
  }
  // Grid search on S=4: argmin proportional to the target.
  {
    const auto label = label_all({0.5, 0.2, 0.1, 0.0});
    const int n = 16;
    double best = std::numeric_limits<double>::infinity();
    std::array<int, 4> arg{};
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; a + b <= n; ++b) {
        for (int c = 0; a + b + c <= n; ++c) {
          const int d = n - a - b - c;
          const double v = signrec_loss(label, four({a / 16.0, b / 16.0, c / 16.0, d / 16.0}));
          if (v < best) {
            best = v;
            arg = {a, b, c, d};
          }
        }
      }
    }
    o.check("signrec grid argmin", arg == std::array<int, 4>{10, 4, 2, 0} ? 0.0 : 1.0, 0.0);
  }
  // ProMo.
  o.check("promo equal", promo_loss(0.4, 0.4, 0.4, 0.4, 0.5), 0.0);
  o.check("promo margin", promo_loss(1.0, 0.0, 0.5, 0.5, 0.5), 0.0);
  o.check("promo ref", promo_loss(0.3, 1.0, 0.3, 0.2, 0.5), 0.3);
  {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 50; ++i) {
      const double e = u(rng), p = u(rng), h = u(rng), f = u(rng), c = std::abs(u(rng));
      o.check("promo random", promo_loss(e, p, h, f, c),
              hinge(std::abs(e - h) - c) + hinge(std::abs(p - f) - c));
    }
  }
  // Discriminator and adversarial.
  o.check("disc (1,0)", disc_loss(1.0, 0.0), 0.0);
  o.check("disc (0.5,0.5)", disc_loss(0.5, 0.5), 0.25);
  o.check("disc (0,1)", disc_loss(0.0, 1.0), 1.0);
  o.check("adv 1", adv_loss(1.0), 0.0);
  o.check("adv 0.5", adv_loss(0.5), 0.25);
  o.check("adv 0", adv_loss(0.0), 1.0);
  // Intra-utterance and speaker-level.
  o.check("ir equal", ir_loss(0.3, 0.2, 0.3, 0.2), 0.0);
  o.check("ir ref", ir_loss(10, 5, 8, 6), 2.0);
  o.check("ir prose", ir_loss(10, 5, 8, 6, IrDirection::kProse), 1.0);
  const corpus::SpeakerStats spk{0.4, 1.0, 0.3, 1.0};
  o.check("sl equal", sl_loss(0.4, 0.3, spk), 0.0);
  o.check("sl 4 sigma", sl_loss(4.4, 0.8, spk), 1.0);
  o.check("sl boundary", sl_loss(3.4, -2.7, spk), 0.0);
  // Natural and total.
  LossWeights w;
  w.lambda_ir = w.lambda_sl = 1.0;
  o.check("natural ref", natural_loss(0.25, 2.0, 1.0, w), 3.25);
  o.check("natural zero", natural_loss(0, 0, 0, w), 0.0);
  w.lambda_ir = w.lambda_sl = 0.0;
  o.check("natural adv only", natural_loss(0.7, 2.0, 1.0, w), 0.7);
  LossWeights t;
  t.lambda_signrec = t.lambda_promo = t.lambda_weight = 1.0;
  o.check("total zero", total_loss(0, 0, 0, 0, t), 0.0);
  o.check("total ref", total_loss(1.0, 0.2, 0.3, 0.5, t), 2.0);
  // Var forms agree with the scalar forms.
  o.check("disc/var", disc_loss(ag::constant(0.3), ag::constant(0.6)).scalar(),
          0.5 * (0.7 * 0.7 + 0.6 * 0.6));
  o.check("adv/var", adv_loss(ag::constant(0.3)).scalar(), 0.49);
  o.check("ir/var",
          ir_loss(ag::constant(10.0), ag::constant(5.0), ag::constant(8.0), ag::constant(6.0))
              .scalar(),
          2.0);
  const double secs = seconds_since(t0);
  verdict("1 loss-oracles", o.worst <= 1e-9 && secs < 1.0,
          std::to_string(o.count) + " checks, max abs err " + fmt("%.2e", o.worst) +
              (o.worst_name.empty() ? "" : " (" + o.worst_name + ")") + ", " +
              fmt("%.3f", secs) + " s");
}

// ---------------------------------------------------------------------------
// 2. Gradient suite.

void criterion_2() {
  const auto t0 = Clock::now();
  const auto results = gradcheck::run_suite({});
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
  }
  verdict("2 gradcheck", all && secs < 120.0,
          std::to_string(results.size()) + " checks, max rel err " + fmt("%.2e", worst) + " (" +
              worst_name + "), " + fmt("%.1f", secs) + " s");
}

// ---------------------------------------------------------------------------
// 3. Label invariants.

void criterion_3() {
  const auto t0 = Clock::now();
  const int bins = 16;
  auto clips = corpus::gen_sign_corpus(1000, 2024, {});
  int bad_sum = 0, bad_translate = 0, bad_bins = 0;
  double worst_sum = 0.0;
  for (auto& clip : clips) {
    // Dyadic grid so translation is exact in floating point.
    clip.frames = (clip.frames * 1048576.0).array().round() / 1048576.0;
    const auto label = sign_prosody::prosody_label(clip, bins);
    const double t = clip.length();
    for (int c = 0; c < sign_prosody::kNumChannels; ++c) {
      const bool vel = c == sign_prosody::kHandVel || c == sign_prosody::kFaceVel;
      double s = 0.0;
      for (double p : label.histograms[c]) s += p;
      const double want = vel ? (t - 1) / t : (t - 2) / t;
      worst_sum = std::max(worst_sum, std::abs(s - want));
      if (std::abs(s - want) > 1e-12) ++bad_sum;
    }
    auto moved = clip;
    moved.frames.array() += 0.375;
    if (!(sign_prosody::prosody_label(moved, bins) == label)) ++bad_translate;
    // Independent binning: bin k holds s_k <= M < s_{k+1}; M = 1 lands in the last bin.
    for (auto part : {corpus::BodyPart::kHand, corpus::BodyPart::kFace}) {
      const auto [v, a] = sign_prosody::motion_series(clip, part);
      const int base = part == corpus::BodyPart::kHand ? sign_prosody::kHandVel
                                                       : sign_prosody::kFaceVel;
      const sign_prosody::MotionSeries* series[2] = {&v, &a};
      for (int which = 0; which < 2; ++which) {
        const auto norm = sign_prosody::normalize_motion(*series[which]);
        std::vector<double> hist(bins, 0.0);
        for (double m : norm.values) {
          int k = 0;
          while (k + 1 < bins && m >= static_cast<double>(k + 1) / bins) ++k;
          hist[static_cast<std::size_t>(k)] += 1.0 / t;
        }
        const auto& got = label.histograms[base + which];
        for (int k = 0; k < bins; ++k) {
          if (std::abs(got[k] - hist[k]) > 1e-12) {
            ++bad_bins;
            break;
          }
        }
      }
    }
  }
  bool edge_ok = sign_prosody::bin_index(1.0, bins) == bins - 1;
  for (int k = 0; k < bins; ++k) {
    edge_ok = edge_ok && sign_prosody::bin_index(static_cast<double>(k) / bins, bins) == k;
  }
  const double secs = seconds_since(t0);
  verdict("3 label-invariants",
          bad_sum == 0 && bad_translate == 0 && bad_bins == 0 && edge_ok && secs < 30.0,
          "1000 clips: sum violations " + std::to_string(bad_sum) + " (max dev " +
              fmt("%.1e", worst_sum) + "), translation " + std::to_string(bad_translate) +
              ", binning " + std::to_string(bad_bins) + ", edges " + (edge_ok ? "ok" : "bad") +
              ", " + fmt("%.1f", secs) + " s");
}

// ---------------------------------------------------------------------------
// Shared smoke-run fixture.

struct Smoke {
  config::RunConfig rc;
  std::unique_ptr<tts::Backbone> backbone;
  train::TrainData data;
  std::unique_ptr<train::TrainState> state;
  std::vector<nlohmann::json> records;
  fs::path dir;
  double pretrain_secs = 0.0;
  double train_secs = 0.0;
};

std::unique_ptr<Smoke> build_smoke() {
  auto s = std::make_unique<Smoke>();
  s->rc.set_seed(0);
  s->rc.validate();
  s->dir = fs::temp_directory_path() / "s2p_acceptance";
  fs::remove_all(s->dir);
  fs::create_directories(s->dir);
  const auto& c = s->rc.corpus;
  auto sign = corpus::gen_sign_corpus(c.n_clips, c.seed, c.corpus);
  auto speech = corpus::gen_speech_corpus(c.n_utterances, c.n_speakers, c.seed, c.corpus);

  auto t0 = Clock::now();
  s->backbone = std::make_unique<tts::Backbone>(s->rc.backbone.model, s->rc.backbone.seed);
  tts::PretrainOptions po;
  po.steps = s->rc.backbone.pretrain_steps;
  po.batch_size = s->rc.backbone.batch_size;
  po.learning_rate = s->rc.backbone.learning_rate;
  po.seed = s->rc.backbone.seed;
  tts::pretrain_backbone(*s->backbone, speech, po);
  s->pretrain_secs = seconds_since(t0);

  s->data = train::prepare_data(std::move(sign), std::move(speech), s->rc.train);
  s->state = std::make_unique<train::TrainState>(s->rc.train, s->backbone->clone());
  return s;
}

void run_smoke(Smoke& s) {
  train::TrainOptions opts;
  opts.metrics_path = s.dir / "metrics.jsonl";
  const auto t0 = Clock::now();
  s.records = train::train(*s.state, s.data, opts);
  s.train_secs = seconds_since(t0);
}

// ---------------------------------------------------------------------------
// 4. Zero-init identity.

void criterion_4(const Smoke& s) {
  train::TrainState fresh(s.rc.train, s.backbone->clone());
  std::mt19937_64 rng(4);
  const auto& cc = s.rc.corpus.corpus;
  std::uniform_int_distribution<int> len(1, cc.max_text_length);
  std::uniform_int_distribution<int> id(0, cc.vocab_size - 1);
  std::uniform_int_distribution<int> spk(0, s.rc.corpus.n_speakers - 1);
  const auto clips = corpus::gen_sign_corpus(50, 77, cc);
  int mismatches = 0;
  for (int i = 0; i < 50; ++i) {
    corpus::PhonemeSequence text;
    text.vocab_size = cc.vocab_size;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) text.ids.push_back(id(rng));
    const int speaker = spk(rng);
    nn::Binder b;
    const auto g = sign::generate(fresh.backbone(), fresh.branch(), b, text, clips[i], speaker);
    const auto base = tts::two_stage_synthesize(fresh.backbone(), text, speaker);
    const corpus::Matrix& m = g.mel.value();
    if (m.rows() != base.mel.values.rows() || m != base.mel.values) ++mismatches;
  }
  verdict("4 zero-init-identity", mismatches == 0,
          "50 random (text, sign) pairs, bitwise mel mismatches: " + std::to_string(mismatches));
}

// ---------------------------------------------------------------------------
// 5. Reference smoke run.

double window_mean(const std::vector<nlohmann::json>& recs, const char* key, std::size_t begin,
                   std::size_t end) {
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += recs[i].at(key).get<double>();
  return sum / static_cast<double>(end - begin);
}

void criterion_5(const Smoke& s) {
  const auto& r = s.records;
  const std::size_t n = r.size();
  constexpr std::size_t kLossWindow = 20;
  constexpr std::size_t kAccWindow = 50;
  const bool enough = n >= 150;

  const double initial = enough ? window_mean(r, "signrec", 0, kLossWindow) : 0.0;
  const double final_ = enough ? window_mean(r, "signrec", n - kLossWindow, n) : 0.0;
  const bool a = enough && final_ < 0.8 * initial;

  // Accuracy over each trailing 50-step window ending after step 100.
  double lo = 1.0, hi = 0.0;
  for (std::size_t end = 100 + kAccWindow; enough && end <= n; ++end) {
    const double m = window_mean(r, "disc_accuracy", end - kAccWindow, end);
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  const bool b = enough && lo > 0.40 && hi < 0.98;

  bool c = true;
  double worst_total = 0.0;
  const auto& w = s.rc.train.weights;
  for (const auto& rec : r) {
    for (const auto& [key, value] : rec.items()) {
      if (value.is_number() && !std::isfinite(value.get<double>())) c = false;
    }
    const double combined = rec.at("natural").get<double>() +
                        w.lambda_signrec * rec.at("signrec").get<double>() +
                        w.lambda_promo * rec.at("promo").get<double>() +
                        w.lambda_weight * rec.at("weight").get<double>();
    worst_total = std::max(worst_total, std::abs(combined - rec.at("total").get<double>()));
  }
  c = c && worst_total <= 1e-9;

  const double secs = s.pretrain_secs + s.train_secs;
  verdict("5 smoke-run", a && b && c && secs < 900.0,
          std::string("(a) signrec ") + fmt("%.4f", initial) + " -> " + fmt("%.4f", final_) +
              " ratio " + fmt("%.3f", enough ? final_ / initial : 0.0) + (a ? " ok" : " FAIL") +
              "; (b) 50-step disc accuracy after step 100 in [" + fmt("%.3f", lo) + ", " +
              fmt("%.3f", hi) + "]" + (b ? " ok" : " FAIL") + "; (c) finite, total-combination dev " +
              fmt("%.1e", worst_total) + (c ? " ok" : " FAIL") + "; pretrain " +
              fmt("%.0f", s.pretrain_secs) + " s + train " + fmt("%.0f", s.train_secs) + " s");
}

// ---------------------------------------------------------------------------
// 6. Expressiveness against the two-stage baseline.

void criterion_6(const Smoke& s) {
  const auto full = eval::expressiveness(eval::contours_of(
      eval::synthesize_clips(*s.state, s.data.test_clips, s.data.n_speakers)));
  const auto base = eval::two_stage_row(*s.backbone, s.data).expressiveness;
  const bool pass = full.dataset_std_pitch > base.dataset_std_pitch &&
                    full.dataset_std_energy > base.dataset_std_energy;
  const auto gan =
      eval::ablation_row("natural", s.rc.train, true, false, false, *s.backbone, s.data);
  const bool gan_ge = gan.expressiveness.dataset_std_pitch >= full.dataset_std_pitch;
  verdict("6 expressiveness", pass,
          "pitch std " + fmt("%.5f", full.dataset_std_pitch) + " vs two-stage " +
              fmt("%.5f", base.dataset_std_pitch) + ", energy std " +
              fmt("%.5f", full.dataset_std_energy) + " vs " +
              fmt("%.5f", base.dataset_std_energy) + " on " + std::to_string(full.samples) +
              " test clips; GAN-only pitch std " +
              fmt("%.5f", gan.expressiveness.dataset_std_pitch) +
              (gan_ge ? " >= full" : " < full") + " (reported, non-gating)");
}

// ---------------------------------------------------------------------------
// 7. Arousal contrast.

void criterion_7(const Smoke& s) {
  const auto r = eval::arousal_contrast(*s.state, s.data.test_clips, s.data.n_speakers);
  const bool pass = r.n_high >= 30 && r.n_low >= 30 && r.delta_energy_std > 0.0 &&
                    r.energy_test.p_greater < 0.05;
  verdict("7 arousal-contrast", pass,
          "energy std high " + fmt("%.5f", r.high_energy_std) + " vs low " +
              fmt("%.5f", r.low_energy_std) + " (delta " + fmt("%+.5f", r.delta_energy_std) +
              "), one-sided rank-sum p " + fmt("%.4f", r.energy_test.p_greater) + ", n " +
              std::to_string(r.n_high) + "/" + std::to_string(r.n_low));
}

// ---------------------------------------------------------------------------
// 8. Determinism and checkpoint exactness.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_lines(const std::string& text, int n) {
  std::size_t pos = 0;
  for (int i = 0; i < n && pos != std::string::npos; ++i) {
    pos = text.find('\n', pos);
    if (pos != std::string::npos) ++pos;
  }
  return pos == std::string::npos ? text : text.substr(0, pos);
}

void criterion_8(const Smoke& s) {
  const std::string reference = slurp(s.dir / "metrics.jsonl");

  // Same configuration again from scratch.
  train::TrainState again(s.rc.train, s.backbone->clone());
  train::TrainOptions opts;
  opts.metrics_path = s.dir / "metrics_rerun.jsonl";
  train::train(again, s.data, opts);
  const bool rerun = !reference.empty() && slurp(opts.metrics_path) == reference;
  bool params = true;
  const auto pa = s.state->branch().params();
  const auto pb = again.branch().params();
  for (std::size_t i = 0; i < pa.size(); ++i) params = params && pa[i]->value == pb[i]->value;

  // Save at step 100, resume for 50 more, compare with the straight run.
  train::TrainConfig head = s.rc.train;
  head.steps = 100;
  train::TrainState part(head, s.backbone->clone());
  train::TrainOptions ro;
  ro.metrics_path = s.dir / "metrics_resumed.jsonl";
  train::train(part, s.data, ro);
  train::save_checkpoint(part, s.dir / "step_100.srg");
  train::TrainConfig tail = s.rc.train;
  tail.steps = 150;
  auto resumed = train::load_checkpoint(s.dir / "step_100.srg", &tail);
  train::train(*resumed, s.data, ro);
  const bool resume = slurp(ro.metrics_path) == first_lines(reference, 150);

  // Save/load round trip is byte-stable.
  train::save_checkpoint(*resumed, s.dir / "a.srg");
  auto reloaded = train::load_checkpoint(s.dir / "a.srg");
  train::save_checkpoint(*reloaded, s.dir / "b.srg");
  const bool idem = slurp(s.dir / "a.srg") == slurp(s.dir / "b.srg");

  verdict("8 determinism", rerun && params && resume && idem,
          std::string("rerun metrics ") + (rerun ? "identical" : "DIFFER") + ", params " +
              (params ? "identical" : "DIFFER") + "; save@100+resume 50 vs straight 150 " +
              (resume ? "identical" : "DIFFER") + "; save/load " +
              (idem ? "byte-stable" : "UNSTABLE"));
}

}  // namespace

int main() {
  try {
    criterion_1();
    criterion_2();
    criterion_3();
    auto smoke = build_smoke();
    criterion_4(*smoke);
    run_smoke(*smoke);
    criterion_5(*smoke);
    criterion_6(*smoke);
    criterion_7(*smoke);
    criterion_8(*smoke);
  } catch (const std::exception& e) {
    std::cout << "FAIL aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
