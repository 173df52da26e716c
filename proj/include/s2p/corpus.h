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

// Synthetic unpaired corpora: signing clips (keypoints + text) and speech
// utterances (mel + text + ground-truth prosody), their file formats, and
// the preprocessing filters applied to clips.

#ifndef S2P_CORPUS_H_
#define S2P_CORPUS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "s2p/prosody.h"

namespace s2p::corpus {

using Matrix = Eigen::MatrixXd;

inline constexpr int kNumJoints = 13;

enum Joint : int {
  kNose = 0,
  kEyeL,
  kEyeR,
  kMouthL,
  kMouthR,
  kShoulderL,
  kShoulderR,
  kElbowL,
  kElbowR,
  kWristL,
  kWristR,
  kHandTipL,
  kHandTipR,
};

enum class BodyPart { kHand, kFace };

struct Skeleton {
  std::array<std::string_view, kNumJoints> joint_names;
  std::vector<int> hand_set;
  std::vector<int> face_set;
  std::vector<std::pair<int, int>> edges;

  static const Skeleton& standard();

  const std::vector<int>& part(BodyPart p) const {
    return p == BodyPart::kHand ? hand_set : face_set;
  }
  // Symmetrically normalized adjacency with self loops, D^-1/2 (A+I) D^-1/2.
  Matrix normalized_adjacency() const;
};

struct PhonemeSequence {
  std::vector<int> ids;
  int vocab_size = 32;

  std::size_t size() const { return ids.size(); }
  // Throws ContractViolation when empty, too long, or out of vocabulary.
  void validate(int max_length) const;
  bool operator==(const PhonemeSequence&) const = default;
};

// frames is T x 26: joint j occupies columns (2j, 2j+1).
struct KeypointSequence {
  Matrix frames;
  std::string clip_id;
  double arousal = 0.0;
  PhonemeSequence text;

  int length() const { return static_cast<int>(frames.rows()); }
  Eigen::Vector2d point(int t, int joint) const {
    return {frames(t, 2 * joint), frames(t, 2 * joint + 1)};
  }
  bool operator==(const KeypointSequence& o) const {
    return clip_id == o.clip_id && arousal == o.arousal && text == o.text &&
           frames.rows() == o.frames.rows() &&
           frames.cols() == o.frames.cols() && frames == o.frames;
  }
};

// N_frames x B.
struct MelSpectrogram {
  Matrix values;

  int frames() const { return static_cast<int>(values.rows()); }
  int bins() const { return static_cast<int>(values.cols()); }
  bool operator==(const MelSpectrogram& o) const {
    return values.rows() == o.values.rows() &&
           values.cols() == o.values.cols() && values == o.values;
  }
};

struct SpeakerStats {
  double mean_pitch = 0.0;
  double std_pitch = 1.0;
  double mean_energy = 0.0;
  double std_energy = 1.0;
};

struct SpeechUtterance {
  std::string utt_id;
  MelSpectrogram mel;
  PhonemeSequence text;
  int speaker_id = 0;
  ProsodyContours true_prosody;

  bool operator==(const SpeechUtterance&) const = default;
};

struct CorpusConfig {
  int vocab_size = 32;
  int mel_bins = 16;
  int max_text_length = 40;
  int min_frames = 30;
  int max_frames = 512;
  int clip_min_frames = 40;
  int clip_max_frames = 120;
  int lexicon_size = 48;
  int min_words = 3;
  int max_words = 8;
  std::uint64_t language_seed = 1234;

  // Throws ConfigError on nonpositive sizes or inverted ranges.
  void validate() const;
};

// Words of 2-4 phoneme ids drawn from the fixed toy language.
std::vector<std::vector<int>> toy_lexicon(const CorpusConfig& cfg);

std::vector<KeypointSequence> gen_sign_corpus(int n_clips, std::uint64_t seed,
                                              const CorpusConfig& cfg);

std::vector<SpeechUtterance> gen_speech_corpus(int n_utts, int n_speakers,
                                               std::uint64_t seed,
                                               const CorpusConfig& cfg);

// Analytic toy speech: phoneme l fills durations[l] identical columns
// holding a Gaussian bump (width 1.5 bins, amplitude energy[l]) centred on
// bin round(pitch[l] * (B-1)), plus a per-phoneme-id pattern in the top
// four bins scaled by 0.2 * energy[l].
MelSpectrogram render_mel(const PhonemeSequence& text,
                          const ProsodyContours& prosody, int mel_bins);

// Truncates clips above max_frames; rejects clips shorter than min_frames
// or with text longer than max_text_length.
std::optional<KeypointSequence> clip_and_filter(KeypointSequence clip,
                                                const CorpusConfig& cfg);

// Per-frame translation of the shoulder midpoint to the origin, then one
// global scale so the mean shoulder width is 1.
Matrix normalize_keypoints(const Matrix& raw);

double mean_shoulder_width(const Matrix& frames);

// Pooled per-phoneme pitch/energy statistics for each speaker.
std::map<int, SpeakerStats> compute_speaker_stats(
    const std::vector<SpeechUtterance>& corpus);

void write_sign_corpus(const std::vector<KeypointSequence>& corpus,
                       const std::filesystem::path& path);
std::vector<KeypointSequence> read_sign_corpus(
    const std::filesystem::path& path, int vocab_size = 32);

// Mel files are written next to the JSON Lines file under "mels/".
void write_speech_corpus(const std::vector<SpeechUtterance>& corpus,
                         const std::filesystem::path& path);
std::vector<SpeechUtterance> read_speech_corpus(
    const std::filesystem::path& path, int vocab_size = 32);

void write_mel(const MelSpectrogram& mel, const std::filesystem::path& path);
MelSpectrogram read_mel(const std::filesystem::path& path);

}  // namespace s2p::corpus

#endif  // S2P_CORPUS_H_
