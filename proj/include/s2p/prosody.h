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

#ifndef S2P_PROSODY_H_
#define S2P_PROSODY_H_

#include <cmath>
#include <cstddef>
#include <vector>

namespace s2p {

// Per-phoneme variance values. Pitch and energy live in normalized [0, 1]
// units; durations are frame counts.
struct ProsodyContours {
  std::vector<double> pitch;
  std::vector<double> energy;
  std::vector<double> log_duration;
  std::vector<int> durations;

  std::size_t size() const { return pitch.size(); }
  int total_frames() const {
    int n = 0;
    for (int d : durations) n += d;
    return n;
  }
  bool operator==(const ProsodyContours&) const = default;
};

inline constexpr int kMaxPhonemeFrames = 1000;

// Round-half-up of exp(log_duration), clamped to [1, kMaxPhonemeFrames].
inline int duration_from_log(double log_duration) {
  const double frames = std::floor(std::exp(log_duration) + 0.5);
  if (!(frames >= 1.0)) return 1;
  if (frames > kMaxPhonemeFrames) return kMaxPhonemeFrames;
  return static_cast<int>(frames);
}

}  // namespace s2p

#endif  // S2P_PROSODY_H_
