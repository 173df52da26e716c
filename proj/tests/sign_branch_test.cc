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
#include <set>

#include <gtest/gtest.h>

#include "s2p/errors.h"
#include "s2p/gradcheck.h"

namespace s2p::sign {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class SignBranchTest : public ::testing::Test {
 protected:
  SignBranchTest() : clips(corpus::gen_sign_corpus(6, 17, {})) {}

  tts::BackboneConfig bcfg;
  tts::Backbone backbone{bcfg, 1};
  SignBranchConfig cfg;
  SignBranch branch{cfg, 2};
  std::vector<KeypointSequence> clips;
  nn::Binder none;
};

TEST_F(SignBranchTest, TemporalStride) {
  for (int t : {30, 40, 41, 57}) {
    const auto f = branch.visual.forward(none, Matrix::Random(t, 26));
    EXPECT_EQ(f.values.rows(), (t + 3) / 4) << t;
    EXPECT_EQ(f.values.cols(), cfg.width);
    EXPECT_TRUE(f.values.value().allFinite());
  }
}

TEST_F(SignBranchTest, ZeroInputGivesBiasResponse) {
  const auto a = branch.visual.forward(none, Matrix::Zero(40, 26));
  nn::Binder other;
  const auto b = branch.visual.forward(other, Matrix::Zero(40, 26));
  EXPECT_EQ(a.values.value(), b.values.value());
  // Away from the edges every row sees the same all-zero context.
  EXPECT_EQ(a.values.value().row(4), a.values.value().row(5));
}

TEST_F(SignBranchTest, RejectsUnnormalizedClips) {
  KeypointSequence k = clips[0];
  EXPECT_NO_THROW(branch.visual(none, k));
  k.frames *= 2.0;
  EXPECT_THROW(branch.visual(none, k), ContractViolation);
}

TEST_F(SignBranchTest, AdapmStartsAsIdentity) {
  for (const auto& clip : clips) {
    const auto lat = backbone.encode(none, clip.text, 1);
    const auto ph = backbone.predict_variance(none, lat);
    const auto out = branch.adapm(none, lat, ph, branch.visual(none, clip));
    const auto base = tts::squash(ph);
    EXPECT_EQ(out.mixed.pitch.value(), base.pitch.value());
    EXPECT_EQ(out.mixed.energy.value(), base.energy.value());
    EXPECT_EQ(out.mixed.log_duration.value(), base.log_duration.value());
    EXPECT_TRUE((out.residual.value().array() == 0.0).all());
    EXPECT_TRUE((out.gate.value().array() == 0.5).all());
    EXPECT_EQ(out.w_sign.scalar(), 0.5);
  }
}

tts::VarianceOutput fixed_variance() {
  Matrix p(3, 1), e(3, 1), d(3, 1);
  p << -1.0, 0.0, 2.0;
  e << 0.5, -0.5, 1.5;
  d << 0.7, 1.1, 1.9;
  return {ag::constant(p), ag::constant(e), ag::constant(d), {true, true, true}};
}

TEST(MixContours, GateOffIgnoresResidual) {
  const auto ph = fixed_variance();
  const Var r = ag::constant(Matrix::Constant(3, 3, 0.7));
  const auto m = mix_contours(ph, r, ag::constant(Matrix::Zero(3, 1)), AdapmChannels::kAll);
  const auto base = tts::squash(ph);
  EXPECT_EQ(m.pitch.value(), base.pitch.value());
  EXPECT_EQ(m.energy.value(), base.energy.value());
  EXPECT_EQ(m.log_duration.value(), base.log_duration.value());
}

TEST(MixContours, GateOnAddsResidualBeforeSquash) {
  const auto ph = fixed_variance();
  Matrix r = Matrix::Zero(3, 3);
  r.col(0).setConstant(0.1);
  const auto m = mix_contours(ph, ag::constant(r), ag::constant(Matrix::Ones(3, 1)),
                              AdapmChannels::kAll);
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(m.pitch.value()(i, 0), sigmoid(ph.pitch_logit.value()(i, 0) + 0.1));
    EXPECT_DOUBLE_EQ(m.energy.value()(i, 0), sigmoid(ph.energy_logit.value()(i, 0)));
  }
}

TEST(MixContours, PitchEnergyModeLeavesDuration) {
  const auto ph = fixed_variance();
  const auto m = mix_contours(ph, ag::constant(Matrix::Constant(3, 3, 0.4)),
                              ag::constant(Matrix::Ones(3, 1)), AdapmChannels::kPitchEnergy);
  EXPECT_EQ(m.log_duration.value(), ph.log_duration.value());
  EXPECT_NE(m.pitch.value(), tts::squash(ph).pitch.value());
}

TEST_F(SignBranchTest, EstimatorOutputsDistributions) {
  Matrix p(5, 1), e(5, 1);
  p << 0.2, 0.4, 0.5, 0.9, 0.1;
  e << 0.3, 0.3, 0.8, 0.2, 0.6;
  const auto out = branch.estimator(none, ag::constant(p), ag::constant(e));
  for (const auto& v : out) {
    ASSERT_EQ(v.cols(), cfg.bins);
    EXPECT_NEAR(v.value().sum(), 1.0, 1e-12);
    EXPECT_GT(v.value().minCoeff(), 0.0);
  }
}

TEST_F(SignBranchTest, EstimatorIgnoresMaskedRows) {
  Matrix p(4, 1), e(4, 1);
  p << 0.2, 0.4, 0.5, 0.9;
  e << 0.3, 0.3, 0.8, 0.2;
  Matrix p2 = p, e2 = e;
  p2(3, 0) = 123.0;
  e2(3, 0) = -7.0;
  const std::vector<bool> mask = {true, true, true, false};
  const auto a = branch.estimator(none, ag::constant(p), ag::constant(e), mask);
  const auto b = branch.estimator(none, ag::constant(p2), ag::constant(e2), mask);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(a[c].value(), b[c].value());
}

TEST_F(SignBranchTest, GenerateMatchesTwoStageAtInit) {
  for (const auto& clip : clips) {
    const auto g = generate(backbone, branch, none, clip.text, clip, 0);
    const auto base = tts::two_stage_synthesize(backbone, clip.text, 0);
    EXPECT_EQ(g.mel.value(), base.mel.values);
    EXPECT_EQ(g.durations, base.contours.durations);
  }
}

TEST_F(SignBranchTest, ParameterNamesAreUnique) {
  std::set<std::string> names;
  for (const auto* p : branch.params()) EXPECT_TRUE(names.insert(p->name).second) << p->name;
  EXPECT_TRUE(names.count("adapm.residual.weight"));
  EXPECT_TRUE(names.count("visual.adjacency_delta"));
  EXPECT_FALSE(names.count("visual.adjacency"));
}

TEST(Gradients, SignBranchSuitePasses) {
  for (const auto& r : gradcheck::run_suite({})) {
    if (r.name != "visual_backbone" && r.name != "adapm" && r.name.rfind("estimator", 0) != 0) {
      continue;
    }
    EXPECT_TRUE(r.passed) << r.name << " " << r.max_rel_error;
  }
}

}  // namespace
}  // namespace s2p::sign
