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

#include "s2p/evaluation.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "s2p/errors.h"

namespace s2p::eval {
namespace {

namespace fs = std::filesystem;

ProsodyContours contour(std::vector<double> pitch, std::vector<double> energy) {
  ProsodyContours c;
  c.durations.assign(pitch.size(), 1);
  c.log_duration.assign(pitch.size(), 0.0);
  c.pitch = std::move(pitch);
  c.energy = std::move(energy);
  return c;
}

TEST(Expressiveness, ConstantContoursHaveZeroSpread) {
  const auto r = expressiveness({contour({0.3, 0.3, 0.3}, {0.6, 0.6, 0.6}),
                                 contour({0.3, 0.3}, {0.6, 0.6})});
  EXPECT_EQ(r.dataset_std_pitch, 0.0);
  EXPECT_EQ(r.dataset_std_energy, 0.0);
  EXPECT_EQ(r.mean_per_sample_std_pitch, 0.0);
  EXPECT_EQ(r.mean_per_sample_std_energy, 0.0);
  EXPECT_EQ(r.samples, 2);
}

TEST(Expressiveness, SingleSampleFixture) {
  const auto r = expressiveness({contour({0.0, 1.0}, {0.0, 1.0})});
  EXPECT_DOUBLE_EQ(r.dataset_std_pitch, 0.5);
  EXPECT_DOUBLE_EQ(r.mean_per_sample_std_pitch, 0.5);
}

TEST(Expressiveness, PooledAndPerSampleDiffer) {
  const auto r = expressiveness({contour({0, 0}, {1, 1}), contour({1, 1}, {1, 1})});
  EXPECT_DOUBLE_EQ(r.dataset_std_pitch, 0.5);
  EXPECT_EQ(r.mean_per_sample_std_pitch, 0.0);
  EXPECT_EQ(r.dataset_std_energy, 0.0);
}

TEST(Expressiveness, ThreeSampleFixture) {
  // Pooled pitch {0.2, 0.4, 0.1, 0.5, 0.3}: mean 0.3, var 0.02.
  // Per-sample: 0.1, 0.2, and the singleton is skipped.
  const auto r = expressiveness(
      {contour({0.2, 0.4}, {0, 0}), contour({0.1, 0.5}, {0, 0}), contour({0.3}, {0})});
  EXPECT_NEAR(r.dataset_std_pitch, std::sqrt(0.02), 1e-12);
  EXPECT_NEAR(r.mean_per_sample_std_pitch, 0.15, 1e-12);
}

TEST(Expressiveness, EmptyInputThrows) {
  EXPECT_THROW(expressiveness({}), StatisticsError);
}

TEST(RankSum, HandComputedExample) {
  const auto r = rank_sum({3, 4, 5}, {1, 2});
  EXPECT_EQ(r.u, 6.0);
  const double z = 2.5 / std::sqrt(3.0);
  EXPECT_NEAR(r.z, z, 1e-12);
  EXPECT_NEAR(r.p_greater, 0.5 * std::erfc(z / std::sqrt(2.0)), 1e-12);
}

TEST(RankSum, TiesAndSymmetry) {
  const auto same = rank_sum({1, 1, 1}, {1, 1, 1});
  EXPECT_EQ(same.z, 0.0);
  EXPECT_EQ(same.p_greater, 0.5);
  const auto ab = rank_sum({1, 5, 6, 2}, {3, 4, 0});
  const auto ba = rank_sum({3, 4, 0}, {1, 5, 6, 2});
  EXPECT_DOUBLE_EQ(ab.u + ba.u, 12.0);
  EXPECT_NEAR(ab.z, -ba.z, 1e-12);
  EXPECT_THROW(rank_sum({}, {1.0}), StatisticsError);
}

std::vector<corpus::KeypointSequence> clips_with_arousal(int n) {
  std::vector<corpus::KeypointSequence> clips(n);
  for (int i = 0; i < n; ++i) {
    clips[i].arousal = static_cast<double>(i) / n;
    clips[i].clip_id = std::to_string(i);
  }
  return clips;
}

TEST(ArousalContrast, TooFewClipsThrows) {
  std::vector<ProsodyContours> c(18, contour({0.1, 0.2}, {0.3, 0.4}));
  EXPECT_THROW(arousal_contrast(c, clips_with_arousal(18)), StatisticsError);
}

TEST(ArousalContrast, DuplicatedGroupsGiveZeroDifference) {
  std::vector<ProsodyContours> c;
  for (int half = 0; half < 2; ++half) {
    for (int i = 0; i < 12; ++i) c.push_back(contour({0.1 * i, 0.05}, {0.02 * i, 0.3}));
  }
  const auto r = arousal_contrast(c, clips_with_arousal(24));
  EXPECT_EQ(r.n_high, 12);
  EXPECT_EQ(r.n_low, 12);
  EXPECT_EQ(r.delta_energy_std, 0.0);
  EXPECT_EQ(r.delta_pitch_std, 0.0);
  EXPECT_DOUBLE_EQ(r.median_arousal, 0.5 * (11.0 + 12.0) / 24.0);
}

TEST(ArousalContrast, SeparatedGroupsAreSignificant) {
  std::vector<ProsodyContours> c;
  for (int i = 0; i < 30; ++i) {
    const double s = i < 15 ? 0.01 * (i + 1) : 0.5 + 0.01 * i;
    c.push_back(contour({0.5, 0.5}, {0.5 - s / 2, 0.5 + s / 2}));
  }
  const auto r = arousal_contrast(c, clips_with_arousal(30));
  EXPECT_GT(r.delta_energy_std, 0.0);
  EXPECT_LT(r.energy_test.p_greater, 1e-4);
  EXPECT_EQ(r.delta_pitch_std, 0.0);
}

class TrainedFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new train::TrainConfig;
    cfg_->steps = 4;
    cfg_->batch_size = 2;
    cfg_->train_fraction = 0.5;
    auto backbone = std::make_unique<tts::Backbone>(tts::BackboneConfig{}, 3);
    backbone->freeze();
    data_ = new train::TrainData(train::prepare_data(
        corpus::gen_sign_corpus(48, 1, {}), corpus::gen_speech_corpus(12, 2, 2, {}), *cfg_));
    backbone_ = backbone.release();
  }
  static void TearDownTestSuite() {
    delete cfg_;
    delete data_;
    delete backbone_;
  }

  static train::TrainConfig* cfg_;
  static train::TrainData* data_;
  static tts::Backbone* backbone_;
};

train::TrainConfig* TrainedFixture::cfg_ = nullptr;
train::TrainData* TrainedFixture::data_ = nullptr;
tts::Backbone* TrainedFixture::backbone_ = nullptr;

TEST_F(TrainedFixture, UntrainedStateShowsNoContrast) {
  train::TrainState state(*cfg_, backbone_->clone());
  const auto r = arousal_contrast(state, data_->test_clips, data_->n_speakers);
  EXPECT_LT(std::abs(r.delta_energy_std), 0.01);
  EXPECT_LT(std::abs(r.delta_pitch_std), 0.01);
  const auto generated = contours_of(synthesize_clips(state, data_->test_clips, 2));
  const auto baseline = contours_of(two_stage_clips(*backbone_, data_->test_clips, 2));
  ASSERT_EQ(generated.size(), baseline.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    EXPECT_EQ(generated[i].pitch, baseline[i].pitch);
    EXPECT_EQ(generated[i].energy, baseline[i].energy);
  }
}

TEST_F(TrainedFixture, AblationSuiteShapeAndIdentity) {
  const auto rows = ablation_suite(*cfg_, *backbone_, *data_);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_TRUE(rows[0].two_stage);
  const auto& off = rows[1];
  EXPECT_FALSE(off.natural || off.signrec || off.promo);
  EXPECT_EQ(off.expressiveness.dataset_std_pitch, rows[0].expressiveness.dataset_std_pitch);
  EXPECT_EQ(off.expressiveness.dataset_std_energy, rows[0].expressiveness.dataset_std_energy);
  EXPECT_EQ(off.expressiveness.mean_per_sample_std_pitch,
            rows[0].expressiveness.mean_per_sample_std_pitch);
  EXPECT_TRUE(rows[4].natural && rows[4].signrec && rows[4].promo);
  const auto table = format_ablation_table(rows);
  EXPECT_NE(table.find("two_stage"), std::string::npos);
  EXPECT_NE(table.find("full"), std::string::npos);
}

TEST_F(TrainedFixture, AblationRowIsDeterministic) {
  const auto a = ablation_row("full", *cfg_, true, true, true, *backbone_, *data_);
  const auto b = ablation_row("full", *cfg_, true, true, true, *backbone_, *data_);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Report, RoundTrips) {
  const fs::path path = fs::temp_directory_path() / "s2p_eval_test" / "eval.json";
  ExpressivenessReport r;
  r.dataset_std_pitch = 0.125;
  r.samples = 3;
  write_report({{"system", r.to_json()}, {"step", 500}}, path);
  const auto doc = read_report(path);
  EXPECT_EQ(doc.at("schema"), kReportSchema);
  EXPECT_EQ(doc.at("step"), 500);
  EXPECT_EQ(doc.at("system").at("dataset_std_pitch").get<double>(), 0.125);
  std::ofstream(path, std::ios::trunc) << "{\"step\": 1}";
  EXPECT_THROW(read_report(path), ParseError);
}

TEST(Plot, MelWidthSpansFrames) {
  const fs::path dir = fs::temp_directory_path() / "s2p_eval_test";
  corpus::MelSpectrogram mel;
  mel.values = corpus::Matrix::Random(37, 16);
  const auto info = plot_mel(mel, dir / "mel.png");
  EXPECT_EQ(info.frames, 37);
  EXPECT_EQ(info.width, 37 * kPixelsPerFrame);
  EXPECT_EQ(info.height, 16 * kPixelsPerBin);
  EXPECT_GT(fs::file_size(dir / "mel.png"), 0u);
}

TEST(Plot, ContourOverlayHasTwoSeriesPerChannel) {
  const fs::path dir = fs::temp_directory_path() / "s2p_eval_test";
  auto gen = contour({0.2, 0.8, 0.5}, {0.1, 0.4, 0.9});
  gen.durations = {3, 2, 4};
  auto base = contour({0.3, 0.3, 0.3}, {0.5, 0.5, 0.5});
  base.durations = {2, 2, 2};
  const auto info = plot_contours(gen, base, dir / "contours.png");
  EXPECT_EQ(info.series_per_channel, (std::vector<int>{2, 2}));
  EXPECT_EQ(info.frames, 9);
  EXPECT_EQ(info.width, 9 * kPixelsPerFrame);
}

}  // namespace
}  // namespace s2p::eval
