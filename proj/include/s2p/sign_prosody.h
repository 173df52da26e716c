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

// Sign prosody labels: histograms of hand/face velocity and acceleration
// magnitudes, plus the corpus-standardized motion means that pair sign
// motion with speech energy and pitch.

#ifndef S2P_SIGN_PROSODY_H_
#define S2P_SIGN_PROSODY_H_

#include <array>
#include <string_view>
#include <utility>
#include <vector>

#include "s2p/corpus.h"

namespace s2p::sign_prosody {

using corpus::BodyPart;
using corpus::KeypointSequence;

enum class MotionKind { kVelocity, kAcceleration };

struct MotionSeries {
  BodyPart part = BodyPart::kHand;
  MotionKind kind = MotionKind::kVelocity;
  std::vector<double> values;
  int raw_length = 0;
};

// (velocity, acceleration) squared-magnitude sums over the part's joints.
// Throws DegenerateInput when fewer than three frames are available.
std::pair<MotionSeries, MotionSeries> motion_series(const KeypointSequence& kps,
                                                    BodyPart part);
std::pair<MotionSeries, MotionSeries> motion_series(const corpus::Matrix& frames,
                                                    BodyPart part);

inline constexpr double kMotionEps = 1e-8;

// Divides by max(max value, eps), mapping the series into [0, 1].
MotionSeries normalize_motion(MotionSeries series, double eps = kMotionEps);

// Histogram index of a value in [0, 1] for S equal-width bins with
// half-open intervals [k/S, (k+1)/S); exactly 1.0 lands in the last bin.
int bin_index(double value, int bins);

enum Channel : int { kHandVel = 0, kHandAcc = 1, kFaceVel = 2, kFaceAcc = 3 };
inline constexpr int kNumChannels = 4;
inline constexpr std::array<std::string_view, kNumChannels> kChannelNames = {
    "hand_vel", "hand_acc", "face_vel", "face_acc"};

struct SignProsodyLabel {
  std::array<std::vector<double>, kNumChannels> histograms;
  int bins = 0;
  int raw_length = 0;

  bool operator==(const SignProsodyLabel&) const = default;
};

enum class Normalization { kPerClip, kCorpus };

struct LabelOptions {
  int bins = 16;
  Normalization normalization = Normalization::kPerClip;
  // Per-channel divisors used with kCorpus, from corpus_motion_max().
  std::array<double, kNumChannels> corpus_max = {1.0, 1.0, 1.0, 1.0};
};

SignProsodyLabel prosody_label(const KeypointSequence& kps, int bins);
SignProsodyLabel prosody_label(const KeypointSequence& kps,
                               const LabelOptions& options);

// Largest value of each motion channel across a corpus.
std::array<double, kNumChannels> corpus_motion_max(
    const std::vector<KeypointSequence>& clips);

struct MotionStats {
  double mean_hand = 0.0;
  double std_hand = 0.0;
  double mean_face = 0.0;
  double std_face = 0.0;
  // Per-clip standardized mean velocity magnitudes, in corpus order.
  std::vector<double> mu_hand;
  std::vector<double> mu_face;

  // Raw per-clip mean velocities (unstandardized).
  static std::pair<double, double> clip_means(const KeypointSequence& kps);
  // z-scores of an arbitrary clip against the frozen corpus statistics.
  std::pair<double, double> standardize(const KeypointSequence& kps) const;
};

// Population statistics over the corpus; throws StatisticsError for fewer
// than two clips or zero spread.
MotionStats motion_means(const std::vector<KeypointSequence>& corpus);

}  // namespace s2p::sign_prosody

#endif  // S2P_SIGN_PROSODY_H_
