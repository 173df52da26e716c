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

#include "s2p/sign_prosody.h"

#include <algorithm>
#include <cmath>

#include "s2p/errors.h"

namespace s2p::sign_prosody {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::array<MotionSeries, kNumChannels> all_series(const KeypointSequence& kps) {
  auto [hv, ha] = motion_series(kps, BodyPart::kHand);
  auto [fv, fa] = motion_series(kps, BodyPart::kFace);
  return {std::move(hv), std::move(ha), std::move(fv), std::move(fa)};
}

}  // namespace

std::pair<MotionSeries, MotionSeries> motion_series(const corpus::Matrix& frames,
                                                    BodyPart part) {
  const int t_len = static_cast<int>(frames.rows());
  if (t_len < 3) {
    throw DegenerateInput("motion_series: need at least 3 frames, got " +
                          std::to_string(t_len));
  }
  const auto& joints = corpus::Skeleton::standard().part(part);
  MotionSeries vel{part, MotionKind::kVelocity, {}, t_len};
  MotionSeries acc{part, MotionKind::kAcceleration, {}, t_len};
  vel.values.assign(static_cast<std::size_t>(t_len - 1), 0.0);
  acc.values.assign(static_cast<std::size_t>(t_len - 2), 0.0);
  for (int j : joints) {
    for (int c = 0; c < 2; ++c) {
      const int col = 2 * j + c;
      double prev_v = 0.0;
      for (int t = 0; t + 1 < t_len; ++t) {
        const double v = frames(t + 1, col) - frames(t, col);
        vel.values[static_cast<std::size_t>(t)] += v * v;
        if (t > 0) {
          const double a = v - prev_v;
          acc.values[static_cast<std::size_t>(t - 1)] += a * a;
        }
        prev_v = v;
      }
    }
  }
  return {std::move(vel), std::move(acc)};
}

std::pair<MotionSeries, MotionSeries> motion_series(const KeypointSequence& kps,
                                                    BodyPart part) {
  return motion_series(kps.frames, part);
}

MotionSeries normalize_motion(MotionSeries series, double eps) {
  double peak = 0.0;
  for (double v : series.values) peak = std::max(peak, v);
  const double denom = std::max(peak, eps);
  for (double& v : series.values) v /= denom;
  return series;
}

int bin_index(double value, int bins) {
  const double s = static_cast<double>(bins);
  int k = static_cast<int>(std::floor(value * s));
  k = std::clamp(k, 0, bins - 1);
  // Settle against the boundaries k/S exactly as the indicator defines them.
  while (k + 1 < bins && value >= static_cast<double>(k + 1) / s) ++k;
  while (k > 0 && value < static_cast<double>(k) / s) --k;
  return k;
}

SignProsodyLabel prosody_label(const KeypointSequence& kps, int bins) {
  LabelOptions options;
  options.bins = bins;
  return prosody_label(kps, options);
}

SignProsodyLabel prosody_label(const KeypointSequence& kps,
                               const LabelOptions& options) {
  if (options.bins < 2) throw ContractViolation("prosody_label: need S >= 2");
  auto series = all_series(kps);
  SignProsodyLabel label;
  label.bins = options.bins;
  label.raw_length = kps.length();
  const double inv_t = 1.0 / static_cast<double>(kps.length());
  for (int c = 0; c < kNumChannels; ++c) {
    MotionSeries s = std::move(series[c]);
    if (options.normalization == Normalization::kPerClip) {
      s = normalize_motion(std::move(s));
    } else {
      const double denom = std::max(options.corpus_max[c], kMotionEps);
      for (double& v : s.values) v = std::min(v / denom, 1.0);
    }
    std::vector<int> counts(static_cast<std::size_t>(options.bins), 0);
    for (double v : s.values) ++counts[static_cast<std::size_t>(bin_index(v, options.bins))];
    auto& hist = label.histograms[c];
    hist.resize(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) {
      hist[k] = static_cast<double>(counts[k]) * inv_t;
    }
  }
  return label;
}

std::array<double, kNumChannels> corpus_motion_max(
    const std::vector<KeypointSequence>& clips) {
  std::array<double, kNumChannels> peak = {0.0, 0.0, 0.0, 0.0};
  for (const auto& clip : clips) {
    auto series = all_series(clip);
    for (int c = 0; c < kNumChannels; ++c) {
      for (double v : series[c].values) peak[c] = std::max(peak[c], v);
    }
  }
  return peak;
}

std::pair<double, double> MotionStats::clip_means(const KeypointSequence& kps) {
  const auto hand = motion_series(kps, BodyPart::kHand).first;
  const auto face = motion_series(kps, BodyPart::kFace).first;
  return {mean_of(hand.values), mean_of(face.values)};
}

std::pair<double, double> MotionStats::standardize(const KeypointSequence& kps) const {
  const auto [h, f] = clip_means(kps);
  return {(h - mean_hand) / std_hand, (f - mean_face) / std_face};
}

MotionStats motion_means(const std::vector<KeypointSequence>& corpus) {
  if (corpus.size() < 2) {
    throw StatisticsError("motion_means: need at least two clips");
  }
  std::vector<double> hand, face;
  hand.reserve(corpus.size());
  face.reserve(corpus.size());
  for (const auto& clip : corpus) {
    const auto [h, f] = MotionStats::clip_means(clip);
    hand.push_back(h);
    face.push_back(f);
  }
  auto pop_std = [](const std::vector<double>& v, double m) {
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    return std::sqrt(var / static_cast<double>(v.size()));
  };
  MotionStats stats;
  stats.mean_hand = mean_of(hand);
  stats.mean_face = mean_of(face);
  stats.std_hand = pop_std(hand, stats.mean_hand);
  stats.std_face = pop_std(face, stats.mean_face);
  if (!(stats.std_hand > 0.0) || !(stats.std_face > 0.0)) {
    throw StatisticsError("motion_means: zero spread of per-clip motion");
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    stats.mu_hand.push_back((hand[i] - stats.mean_hand) / stats.std_hand);
    stats.mu_face.push_back((face[i] - stats.mean_face) / stats.std_face);
  }
  return stats;
}

}  // namespace s2p::sign_prosody
