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

#include "s2p/corpus.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "s2p/errors.h"
#include "s2p/sign_prosody.h"

namespace s2p::corpus {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("s2p_corpus_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double mean_hand_speed(const KeypointSequence& clip) {
  const auto v = sign_prosody::motion_series(clip, BodyPart::kHand).first.values;
  double s = 0.0;
  for (double x : v) s += std::sqrt(x);
  return s / static_cast<double>(v.size());
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = static_cast<double>(i);
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

TEST(Skeleton, PartsAreDisjointAndEdgesValid) {
  const auto& s = Skeleton::standard();
  for (int h : s.hand_set) {
    EXPECT_EQ(std::count(s.face_set.begin(), s.face_set.end(), h), 0);
  }
  EXPECT_EQ(s.hand_set, (std::vector<int>{kWristL, kWristR, kHandTipL, kHandTipR}));
  EXPECT_EQ(s.face_set.size(), 5u);
  for (auto [a, b] : s.edges) {
    EXPECT_GE(a, 0);
    EXPECT_LT(a, kNumJoints);
    EXPECT_GE(b, 0);
    EXPECT_LT(b, kNumJoints);
  }
  const Matrix adj = s.normalized_adjacency();
  EXPECT_TRUE(adj.isApprox(adj.transpose()));
  EXPECT_GT(adj.diagonal().minCoeff(), 0.0);
}

TEST(GenSignCorpus, Deterministic) {
  const CorpusConfig cfg;
  EXPECT_EQ(gen_sign_corpus(5, 7, cfg), gen_sign_corpus(5, 7, cfg));
  EXPECT_NE(gen_sign_corpus(5, 7, cfg), gen_sign_corpus(5, 8, cfg));
}

TEST(GenSignCorpus, ClipsSatisfyInvariants) {
  const CorpusConfig cfg;
  const auto clips = gen_sign_corpus(60, 0, cfg);
  std::set<std::string> ids;
  for (const auto& c : clips) {
    EXPECT_GE(c.length(), 30);
    EXPECT_LE(c.length(), 512);
    EXPECT_GE(c.length(), cfg.clip_min_frames);
    EXPECT_LE(c.length(), cfg.clip_max_frames);
    EXPECT_TRUE(c.frames.allFinite());
    EXPECT_GE(c.arousal, 0.0);
    EXPECT_LE(c.arousal, 1.0);
    EXPECT_NO_THROW(c.text.validate(cfg.max_text_length));
    EXPECT_NEAR(mean_shoulder_width(c.frames), 1.0, 1e-9);
    EXPECT_TRUE(ids.insert(c.clip_id).second);
  }
}

TEST(GenSignCorpus, ArousalDrivesHandSpeed) {
  const auto clips = gen_sign_corpus(150, 3, {});
  std::vector<double> arousal, speed;
  for (const auto& c : clips) {
    arousal.push_back(c.arousal);
    speed.push_back(mean_hand_speed(c));
  }
  EXPECT_GE(spearman(arousal, speed), 0.8);
  const auto lo = std::min_element(arousal.begin(), arousal.end()) - arousal.begin();
  const auto hi = std::max_element(arousal.begin(), arousal.end()) - arousal.begin();
  EXPECT_GT(speed[hi], speed[lo]);
}

TEST(GenSignCorpus, RejectsBadConfig) {
  CorpusConfig cfg;
  EXPECT_THROW(gen_sign_corpus(0, 1, cfg), ConfigError);
  cfg.clip_min_frames = 200;
  EXPECT_THROW(gen_sign_corpus(3, 1, cfg), ConfigError);
}

TEST(GenSpeechCorpus, DeterministicAndConsistent) {
  const CorpusConfig cfg;
  const auto a = gen_speech_corpus(30, 2, 4, cfg);
  EXPECT_EQ(a, gen_speech_corpus(30, 2, 4, cfg));
  for (const auto& u : a) {
    EXPECT_EQ(u.mel.frames(), u.true_prosody.total_frames());
    EXPECT_EQ(u.mel.bins(), cfg.mel_bins);
    EXPECT_TRUE(u.mel.values.allFinite());
    for (double p : u.true_prosody.pitch) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
    for (double e : u.true_prosody.energy) {
      EXPECT_GE(e, 0.0);
      EXPECT_LE(e, 1.0);
    }
  }
  EXPECT_THROW(gen_speech_corpus(5, 0, 1, cfg), ConfigError);
}

TEST(GenSpeechCorpus, SpeakerStatsDiffer) {
  const auto stats = compute_speaker_stats(gen_speech_corpus(100, 2, 1, {}));
  ASSERT_EQ(stats.size(), 2u);
  for (const auto& [k, s] : stats) {
    EXPECT_GT(s.std_pitch, 0.0) << k;
    EXPECT_GT(s.std_energy, 0.0) << k;
  }
  EXPECT_NE(stats.at(0).mean_pitch, stats.at(1).mean_pitch);
}

PhonemeSequence text_of(std::vector<int> ids) {
  PhonemeSequence t;
  t.ids = std::move(ids);
  return t;
}

TEST(RenderMel, ZeroEnergyIsSilent) {
  ProsodyContours p;
  p.pitch = {0.2, 0.9};
  p.energy = {0.0, 0.0};
  p.durations = {2, 3};
  const auto mel = render_mel(text_of({1, 2}), p, 16);
  EXPECT_EQ(mel.frames(), 5);
  EXPECT_TRUE((mel.values.array() == 0.0).all());
}

TEST(RenderMel, SinglePhonemeBump) {
  ProsodyContours p;
  p.pitch = {0.5};
  p.energy = {1.0};
  p.durations = {3};
  const auto mel = render_mel(text_of({4}), p, 16);
  ASSERT_EQ(mel.frames(), 3);
  EXPECT_EQ(mel.values.row(0), mel.values.row(1));
  EXPECT_EQ(mel.values.row(1), mel.values.row(2));
  Eigen::Index peak = 0;
  mel.values.row(0).head(12).maxCoeff(&peak);
  EXPECT_EQ(peak, 8);
  EXPECT_DOUBLE_EQ(mel.values(0, 8), 1.0);
  EXPECT_DOUBLE_EQ(mel.values(0, 7), std::exp(-0.5 / 2.25));
}

TEST(RenderMel, DoublingDurationsRepeatsColumns) {
  ProsodyContours p;
  p.pitch = {0.1, 0.6, 0.3};
  p.energy = {0.4, 0.8, 0.5};
  p.durations = {1, 2, 3};
  const auto once = render_mel(text_of({1, 5, 9}), p, 16);
  for (int& d : p.durations) d *= 2;
  const auto twice = render_mel(text_of({1, 5, 9}), p, 16);
  ASSERT_EQ(twice.frames(), 2 * once.frames());
  for (int r = 0; r < once.frames(); ++r) {
    EXPECT_EQ(twice.values.row(2 * r), once.values.row(r));
    EXPECT_EQ(twice.values.row(2 * r + 1), once.values.row(r));
  }
}

TEST(RenderMel, LengthMismatchThrows) {
  ProsodyContours p;
  p.pitch = {0.1};
  p.energy = {0.4, 0.2};
  p.durations = {1, 1};
  EXPECT_THROW(render_mel(text_of({1, 2}), p, 16), ContractViolation);
}

KeypointSequence clip_with_length(int t) {
  KeypointSequence k;
  k.frames = Matrix::Random(t, 26);
  k.clip_id = "x";
  k.text = text_of({1, 2, 3});
  return k;
}

TEST(ClipAndFilter, Examples) {
  const CorpusConfig cfg;
  const auto longer = clip_and_filter(clip_with_length(600), cfg);
  ASSERT_TRUE(longer.has_value());
  EXPECT_EQ(longer->length(), 512);
  EXPECT_FALSE(clip_and_filter(clip_with_length(29), cfg).has_value());
  const auto mid = clip_with_length(100);
  EXPECT_EQ(clip_and_filter(mid, cfg).value(), mid);
  auto wordy = clip_with_length(100);
  wordy.text.ids.assign(41, 3);
  EXPECT_FALSE(clip_and_filter(wordy, cfg).has_value());
}

Matrix raw_pose(std::uint64_t seed, int t) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.4);
  Matrix f(t, 26);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = n(rng);
  for (int r = 0; r < t; ++r) {
    f(r, 2 * kShoulderL) = -0.5 + 0.05 * n(rng);
    f(r, 2 * kShoulderR) = 0.5 + 0.05 * n(rng);
  }
  return f;
}

TEST(NormalizeKeypoints, InvariantToTranslationAndScale) {
  const Matrix raw = raw_pose(1, 20);
  const Matrix base = normalize_keypoints(raw);
  EXPECT_NEAR(mean_shoulder_width(base), 1.0, 1e-12);
  Matrix moved = raw;
  moved.array() += 5.0;
  EXPECT_LT((normalize_keypoints(moved) - base).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((normalize_keypoints(raw * 3.0) - base).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((normalize_keypoints(base) - base).cwiseAbs().maxCoeff(), 1e-9);
  for (int r = 0; r < base.rows(); ++r) {
    EXPECT_NEAR(base(r, 2 * kShoulderL) + base(r, 2 * kShoulderR), 0.0, 1e-12);
  }
}

TEST(NormalizeKeypoints, ZeroShoulderWidthThrows) {
  Matrix raw = raw_pose(2, 5);
  raw(3, 2 * kShoulderL) = raw(3, 2 * kShoulderR);
  raw(3, 2 * kShoulderL + 1) = raw(3, 2 * kShoulderR + 1);
  EXPECT_THROW(normalize_keypoints(raw), DegenerateInput);
}

TEST(Io, SignCorpusRoundTrip) {
  const auto dir = temp_dir("sign");
  const auto clips = gen_sign_corpus(4, 11, {});
  write_sign_corpus(clips, dir / "sign.jsonl");
  EXPECT_EQ(read_sign_corpus(dir / "sign.jsonl"), clips);
  write_sign_corpus({}, dir / "empty.jsonl");
  EXPECT_TRUE(fs::exists(dir / "empty.jsonl"));
  EXPECT_TRUE(read_sign_corpus(dir / "empty.jsonl").empty());
}

TEST(Io, SpeechCorpusRoundTrip) {
  const auto dir = temp_dir("speech");
  const auto utts = gen_speech_corpus(5, 2, 3, {});
  write_speech_corpus(utts, dir / "speech.jsonl");
  EXPECT_EQ(read_speech_corpus(dir / "speech.jsonl"), utts);
}

TEST(Io, TruncatedFileNamesRecord) {
  const auto dir = temp_dir("trunc");
  write_sign_corpus(gen_sign_corpus(3, 1, {}), dir / "sign.jsonl");
  std::string text;
  {
    std::ifstream in(dir / "sign.jsonl");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(dir / "sign.jsonl", std::ios::trunc);
    out << text.substr(0, text.size() - 200);
  }
  try {
    read_sign_corpus(dir / "sign.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
  }
}

TEST(Io, MelBinaryLayout) {
  const auto dir = temp_dir("mel");
  MelSpectrogram mel;
  mel.values = Matrix::Zero(2, 3);
  mel.values << 0.5, -1.0, 2.0, 0.25, 0.0, 8.0;
  write_mel(mel, dir / "a.mel");
  EXPECT_EQ(fs::file_size(dir / "a.mel"), 4u + 8u + 6u * 4u);
  std::ifstream in(dir / "a.mel", std::ios::binary);
  char head[12];
  in.read(head, 12);
  EXPECT_EQ(std::string(head, 4), "MEL1");
  EXPECT_EQ(static_cast<unsigned char>(head[4]), 2);
  EXPECT_EQ(static_cast<unsigned char>(head[8]), 3);
  EXPECT_EQ(read_mel(dir / "a.mel"), mel);
  std::ofstream(dir / "bad.mel", std::ios::binary) << "MEL0";
  EXPECT_THROW(read_mel(dir / "bad.mel"), ParseError);
}

}  // namespace
}  // namespace s2p::corpus
