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
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "s2p/errors.h"
#include "s2p/rng.h"

namespace s2p::corpus {

namespace {

using nlohmann::json;

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Rest pose in shoulder-width units, y pointing down like image rows.
constexpr std::array<std::array<double, 2>, kNumJoints> kRestPose = {{
    {0.0, -1.00},   // nose
    {-0.15, -1.15}, // eyeL
    {0.15, -1.15},  // eyeR
    {-0.10, -0.85}, // mouthL
    {0.10, -0.85},  // mouthR
    {-0.50, 0.00},  // shoulderL
    {0.50, 0.00},   // shoulderR
    {-0.70, 0.60},  // elbowL
    {0.70, 0.60},   // elbowR
    {-0.40, 0.90},  // wristL
    {0.40, 0.90},   // wristR
    {-0.37, 1.05},  // handTipL
    {0.37, 1.05},   // handTipR
}};

struct Language {
  std::vector<double> base_pitch;
  std::vector<double> base_energy;
  std::vector<int> base_duration;
  std::vector<std::vector<int>> lexicon;
};

Language make_language(const CorpusConfig& cfg) {
  Language lang;
  std::mt19937_64 rng(splitmix64(cfg.language_seed));
  for (int id = 0; id < cfg.vocab_size; ++id) {
    lang.base_pitch.push_back(uniform(rng, 0.25, 0.60));
    lang.base_energy.push_back(uniform(rng, 0.15, 0.38));
    lang.base_duration.push_back(static_cast<int>(uniform_int(rng, 2, 5)));
  }
  for (int w = 0; w < cfg.lexicon_size; ++w) {
    const auto len = uniform_int(rng, 2, 4);
    std::vector<int> word;
    for (int k = 0; k < len; ++k) {
      word.push_back(static_cast<int>(uniform_int(rng, 0, cfg.vocab_size - 1)));
    }
    lang.lexicon.push_back(std::move(word));
  }
  return lang;
}

PhonemeSequence sample_sentence(std::mt19937_64& rng, const Language& lang,
                                const CorpusConfig& cfg) {
  PhonemeSequence text;
  text.vocab_size = cfg.vocab_size;
  const auto words = uniform_int(rng, cfg.min_words, cfg.max_words);
  for (int w = 0; w < words; ++w) {
    const auto& word = lang.lexicon[static_cast<std::size_t>(
        uniform_int(rng, 0, cfg.lexicon_size - 1))];
    if (text.ids.size() + word.size() >
        static_cast<std::size_t>(cfg.max_text_length)) {
      break;
    }
    text.ids.insert(text.ids.end(), word.begin(), word.end());
  }
  if (text.ids.empty()) text.ids.push_back(lang.lexicon[0][0]);
  return text;
}

double gaussian_window(double t, double center, double width) {
  const double z = (t - center) / width;
  return std::exp(-0.5 * z * z);
}

KeypointSequence generate_clip(std::uint64_t seed, int index,
                               const Language& lang, const CorpusConfig& cfg) {
  auto rng = stream_for(seed, static_cast<std::uint64_t>(index));
  const double arousal = uniform01(rng);
  const double gain = 0.3 + 0.7 * arousal;
  const int frames =
      static_cast<int>(uniform_int(rng, cfg.clip_min_frames, cfg.clip_max_frames));
  PhonemeSequence text = sample_sentence(rng, lang, cfg);

  struct Wave {
    double freq, phase;
  };
  auto wave = [&](double lo, double hi) {
    return Wave{uniform(rng, lo, hi), uniform(rng, 0.0, kTwoPi)};
  };
  std::array<Wave, 2> hand_x = {wave(0.05, 0.07), wave(0.05, 0.07)};
  std::array<Wave, 2> hand_y = {wave(0.05, 0.07), wave(0.05, 0.07)};
  std::array<Wave, 3> head = {wave(0.05, 0.12), wave(0.05, 0.12),
                              wave(0.05, 0.12)};
  const Wave mouth = wave(0.12, 0.18);
  const Wave tip = wave(0.08, 0.12);
  const Wave sway = wave(0.008, 0.015);

  // Emphasis bursts: short fast strokes, more frequent when aroused.
  const int bursts = static_cast<int>(std::floor(4.0 * arousal + uniform01(rng)));
  std::vector<double> burst_at;
  for (int b = 0; b < bursts; ++b) {
    burst_at.push_back(uniform(rng, 5.0, frames - 5.0));
  }

  const double px_scale = uniform(rng, 80.0, 120.0);
  const double origin_x = uniform(rng, 250.0, 390.0);
  const double origin_y = uniform(rng, 180.0, 300.0);

  Matrix raw(frames, 2 * kNumJoints);
  for (int t = 0; t < frames; ++t) {
    const double tt = static_cast<double>(t);
    std::array<Eigen::Vector2d, kNumJoints> p;
    for (int j = 0; j < kNumJoints; ++j) {
      p[j] = {kRestPose[j][0], kRestPose[j][1]};
    }

    double burst = 0.0;
    for (double c : burst_at) burst += gaussian_window(tt, c, 3.0);

    // Hands.
    const int wrists[2] = {kWristL, kWristR};
    const int tips[2] = {kHandTipL, kHandTipR};
    const int elbows[2] = {kElbowL, kElbowR};
    const int shoulders[2] = {kShoulderL, kShoulderR};
    for (int h = 0; h < 2; ++h) {
      const double side = h == 0 ? -1.0 : 1.0;
      const double stroke = (h == 1 ? 1.0 : 0.5) * 0.25 * burst;
      Eigen::Vector2d offset(
          0.30 * std::sin(kTwoPi * hand_x[h].freq * tt + hand_x[h].phase) +
              stroke * std::sin(kTwoPi * 0.18 * tt),
          0.22 * std::sin(kTwoPi * hand_y[h].freq * tt + hand_y[h].phase) +
              stroke * std::cos(kTwoPi * 0.18 * tt));
      p[wrists[h]] += gain * offset;
      p[tips[h]] = p[wrists[h]] + Eigen::Vector2d(side * -0.03, 0.15) +
                   gain * Eigen::Vector2d(
                              0.03 * std::sin(kTwoPi * tip.freq * tt + tip.phase),
                              0.0);
      p[elbows[h]] = 0.5 * (p[shoulders[h]] + p[wrists[h]]) +
                     Eigen::Vector2d(side * 0.15, 0.10);
    }

    // Face: head jitter, nods on emphasis, mouthing.
    Eigen::Vector2d head_offset(0.0, 0.0);
    for (const Wave& w : head) {
      head_offset += 0.03 * Eigen::Vector2d(std::sin(kTwoPi * w.freq * tt + w.phase),
                                            std::cos(kTwoPi * w.freq * tt + w.phase));
    }
    head_offset.y() += 0.04 * burst * std::sin(kTwoPi * 0.2 * tt);
    for (int j : {kNose, kEyeL, kEyeR, kMouthL, kMouthR}) {
      p[j] += gain * head_offset;
    }
    const double open =
        gain * 0.015 * std::sin(kTwoPi * mouth.freq * tt + mouth.phase);
    p[kMouthL].y() += open;
    p[kMouthR].y() += open;

    // Whole-body sway; removed again by normalization.
    const Eigen::Vector2d body(0.05 * std::sin(kTwoPi * sway.freq * tt + sway.phase),
                               0.02 * std::cos(kTwoPi * sway.freq * tt + sway.phase));
    for (int j = 0; j < kNumJoints; ++j) {
      const Eigen::Vector2d q = p[j] + body;
      raw(t, 2 * j) = origin_x + px_scale * (q.x() + 0.002 * normal(rng));
      raw(t, 2 * j + 1) = origin_y + px_scale * (q.y() + 0.002 * normal(rng));
    }
  }

  KeypointSequence clip;
  clip.frames = normalize_keypoints(raw);
  char id[32];
  std::snprintf(id, sizeof(id), "clip_%05d", index);
  clip.clip_id = id;
  clip.arousal = arousal;
  clip.text = std::move(text);
  return clip;
}

double speaker_pitch_offset(int speaker, int n_speakers) {
  if (n_speakers <= 1) return 0.0;
  return 0.12 * (static_cast<double>(speaker) / (n_speakers - 1) - 0.5);
}

double speaker_energy_offset(int speaker, int n_speakers) {
  if (n_speakers <= 1) return 0.0;
  return 0.06 * (0.5 - static_cast<double>(speaker) / (n_speakers - 1));
}

double phoneme_pattern(int id, int k) {
  return 0.5 + 0.5 * std::sin(1.7 * id + 2.3 * k);
}

// --- little-endian helpers -------------------------------------------------

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) |
      (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

void put_f32(std::ostream& os, float f) {
  put_u32(os, std::bit_cast<std::uint32_t>(f));
}

bool get_f32(std::istream& is, float& f) {
  std::uint32_t u;
  if (!get_u32(is, u)) return false;
  f = std::bit_cast<float>(u);
  return true;
}

PhonemeSequence text_from_json(const json& j, int vocab) {
  PhonemeSequence t;
  t.vocab_size = vocab;
  t.ids = j.get<std::vector<int>>();
  return t;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string record_label(const std::filesystem::path& path, std::size_t line,
                         const std::string& body) {
  std::string id;
  const auto pos = body.find("_id\":\"");
  if (pos != std::string::npos) {
    const auto end = body.find('"', pos + 6);
    if (end != std::string::npos) id = body.substr(pos + 6, end - pos - 6);
  }
  std::string label = path.filename().string() + " record " + std::to_string(line);
  if (!id.empty()) label += " (" + id + ")";
  return label;
}

}  // namespace

const Skeleton& Skeleton::standard() {
  static const Skeleton skeleton = [] {
    Skeleton s;
    s.joint_names = {"nose",      "eyeL",      "eyeR",     "mouthL",
                     "mouthR",    "shoulderL", "shoulderR", "elbowL",
                     "elbowR",    "wristL",    "wristR",   "handTipL",
                     "handTipR"};
    s.hand_set = {kWristL, kWristR, kHandTipL, kHandTipR};
    s.face_set = {kNose, kEyeL, kEyeR, kMouthL, kMouthR};
    s.edges = {{kNose, kEyeL},         {kNose, kEyeR},
               {kNose, kMouthL},       {kNose, kMouthR},
               {kMouthL, kMouthR},     {kNose, kShoulderL},
               {kNose, kShoulderR},    {kShoulderL, kShoulderR},
               {kShoulderL, kElbowL},  {kShoulderR, kElbowR},
               {kElbowL, kWristL},     {kElbowR, kWristR},
               {kWristL, kHandTipL},   {kWristR, kHandTipR}};
    return s;
  }();
  return skeleton;
}

Matrix Skeleton::normalized_adjacency() const {
  Matrix a = Matrix::Identity(kNumJoints, kNumJoints);
  for (auto [i, j] : edges) {
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  Eigen::VectorXd inv_sqrt_deg = a.rowwise().sum().array().rsqrt();
  return inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
}

void PhonemeSequence::validate(int max_length) const {
  if (ids.empty()) throw ContractViolation("phoneme sequence is empty");
  if (static_cast<int>(ids.size()) > max_length) {
    throw ContractViolation("phoneme sequence longer than " +
                            std::to_string(max_length));
  }
  for (int id : ids) {
    if (id < 0 || id >= vocab_size) {
      throw ContractViolation("phoneme id " + std::to_string(id) +
                              " outside vocabulary of size " +
                              std::to_string(vocab_size));
    }
  }
}

void CorpusConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("corpus.") + name + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(mel_bins, "mel_bins");
  positive(max_text_length, "max_text_length");
  positive(min_frames, "min_frames");
  positive(max_frames, "max_frames");
  positive(clip_min_frames, "clip_min_frames");
  positive(clip_max_frames, "clip_max_frames");
  positive(lexicon_size, "lexicon_size");
  positive(min_words, "min_words");
  positive(max_words, "max_words");
  if (mel_bins < 5) throw ConfigError("corpus.mel_bins must be at least 5");
  if (min_frames < 3) throw ConfigError("corpus.min_frames must be at least 3");
  if (min_frames > max_frames) throw ConfigError("corpus.min_frames > max_frames");
  if (clip_min_frames > clip_max_frames) {
    throw ConfigError("corpus.clip_min_frames > clip_max_frames");
  }
  if (min_words > max_words) throw ConfigError("corpus.min_words > max_words");
}

std::vector<std::vector<int>> toy_lexicon(const CorpusConfig& cfg) {
  cfg.validate();
  return make_language(cfg).lexicon;
}

std::vector<KeypointSequence> gen_sign_corpus(int n_clips, std::uint64_t seed,
                                              const CorpusConfig& cfg) {
  cfg.validate();
  if (n_clips < 1) throw ConfigError("gen_sign_corpus: n_clips must be >= 1");
  const Language lang = make_language(cfg);
  std::vector<KeypointSequence> out;
  out.reserve(static_cast<std::size_t>(n_clips));
  for (int i = 0; i < n_clips; ++i) {
    auto clip = clip_and_filter(generate_clip(seed, i, lang, cfg), cfg);
    // Generated lengths and texts always satisfy the filters; keep the
    // filter in the path so configuration changes are still honoured.
    if (clip) out.push_back(std::move(*clip));
  }
  return out;
}

std::vector<SpeechUtterance> gen_speech_corpus(int n_utts, int n_speakers,
                                               std::uint64_t seed,
                                               const CorpusConfig& cfg) {
  cfg.validate();
  if (n_utts < 1) throw ConfigError("gen_speech_corpus: n_utts must be >= 1");
  if (n_speakers < 1) throw ConfigError("gen_speech_corpus: n_speakers must be >= 1");
  const Language lang = make_language(cfg);
  std::vector<SpeechUtterance> out;
  out.reserve(static_cast<std::size_t>(n_utts));
  for (int u = 0; u < n_utts; ++u) {
    auto rng = stream_for(seed ^ 0x5eec4ULL, static_cast<std::uint64_t>(u));
    SpeechUtterance utt;
    char id[32];
    std::snprintf(id, sizeof(id), "utt_%05d", u);
    utt.utt_id = id;
    utt.speaker_id = u % n_speakers;
    utt.text = sample_sentence(rng, lang, cfg);

    const double expressive = uniform(rng, 0.6, 1.6);
    const double shift_p = 0.03 * normal(rng);
    const double shift_e = 0.02 * normal(rng);
    const double off_p = speaker_pitch_offset(utt.speaker_id, n_speakers);
    const double off_e = speaker_energy_offset(utt.speaker_id, n_speakers);
    const std::size_t len = utt.text.size();
    ProsodyContours& pr = utt.true_prosody;
    for (std::size_t l = 0; l < len; ++l) {
      const int id_l = utt.text.ids[l];
      const double pos =
          len > 1 ? static_cast<double>(l) / static_cast<double>(len - 1) : 0.5;
      const double pitch =
          lang.base_pitch[id_l] + off_p + shift_p +
          expressive * (0.06 * (0.5 - pos) + 0.04 * normal(rng));
      const double energy = lang.base_energy[id_l] + off_e + shift_e +
                            expressive * 0.03 * normal(rng);
      const int dur = std::max<int>(
          1, lang.base_duration[id_l] + static_cast<int>(uniform_int(rng, -1, 1)));
      pr.pitch.push_back(std::clamp(pitch, 0.02, 0.98));
      pr.energy.push_back(std::clamp(energy, 0.02, 0.98));
      pr.durations.push_back(dur);
      pr.log_duration.push_back(std::log(static_cast<double>(dur)));
    }
    utt.mel = render_mel(utt.text, pr, cfg.mel_bins);
    for (Eigen::Index i = 0; i < utt.mel.values.size(); ++i) {
      utt.mel.values.data()[i] =
          static_cast<double>(static_cast<float>(utt.mel.values.data()[i]));
    }
    out.push_back(std::move(utt));
  }
  return out;
}

MelSpectrogram render_mel(const PhonemeSequence& text,
                          const ProsodyContours& prosody, int mel_bins) {
  const std::size_t len = text.size();
  if (prosody.pitch.size() != len || prosody.energy.size() != len ||
      prosody.durations.size() != len) {
    throw ContractViolation("render_mel: contour lengths differ from text length");
  }
  if (mel_bins < 5) throw ContractViolation("render_mel: need at least 5 mel bins");
  int frames = 0;
  for (std::size_t l = 0; l < len; ++l) {
    if (prosody.durations[l] < 1) {
      throw ContractViolation("render_mel: durations must be >= 1");
    }
    const double p = prosody.pitch[l];
    const double e = prosody.energy[l];
    if (!(p >= 0.0 && p <= 1.0) || !(e >= 0.0 && e <= 1.0)) {
      throw ContractViolation("render_mel: pitch and energy must lie in [0, 1]");
    }
    frames += prosody.durations[l];
  }
  if (frames < 1) throw ContractViolation("render_mel: empty utterance");

  constexpr double kWidth = 1.5;
  MelSpectrogram mel;
  mel.values = Matrix::Zero(frames, mel_bins);
  int row = 0;
  for (std::size_t l = 0; l < len; ++l) {
    const double e = prosody.energy[l];
    const double center = std::floor(prosody.pitch[l] * (mel_bins - 1) + 0.5);
    Eigen::RowVectorXd column(mel_bins);
    for (int b = 0; b < mel_bins; ++b) {
      const double z = (b - center) / kWidth;
      column(b) = e * std::exp(-0.5 * z * z);
    }
    for (int k = 0; k < 4; ++k) {
      column(mel_bins - 4 + k) += 0.2 * e * phoneme_pattern(text.ids[l], k);
    }
    for (int d = 0; d < prosody.durations[l]; ++d) mel.values.row(row++) = column;
  }
  return mel;
}

std::optional<KeypointSequence> clip_and_filter(KeypointSequence clip,
                                                const CorpusConfig& cfg) {
  if (clip.length() < cfg.min_frames) return std::nullopt;
  if (static_cast<int>(clip.text.size()) > cfg.max_text_length) return std::nullopt;
  if (clip.length() > cfg.max_frames) {
    clip.frames = Matrix(clip.frames.topRows(cfg.max_frames));
  }
  return clip;
}

double mean_shoulder_width(const Matrix& frames) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    const Eigen::Vector2d l(frames(t, 2 * kShoulderL), frames(t, 2 * kShoulderL + 1));
    const Eigen::Vector2d r(frames(t, 2 * kShoulderR), frames(t, 2 * kShoulderR + 1));
    total += (l - r).norm();
  }
  return frames.rows() > 0 ? total / static_cast<double>(frames.rows()) : 0.0;
}

Matrix normalize_keypoints(const Matrix& raw) {
  if (raw.cols() != 2 * kNumJoints) {
    throw ContractViolation("normalize_keypoints: expected 26 columns per frame");
  }
  if (raw.rows() < 1) throw DegenerateInput("normalize_keypoints: no frames");
  if (!raw.allFinite()) throw DegenerateInput("normalize_keypoints: non-finite input");
  Matrix out = raw;
  for (Eigen::Index t = 0; t < raw.rows(); ++t) {
    const double mx = 0.5 * (raw(t, 2 * kShoulderL) + raw(t, 2 * kShoulderR));
    const double my =
        0.5 * (raw(t, 2 * kShoulderL + 1) + raw(t, 2 * kShoulderR + 1));
    const double width =
        std::hypot(raw(t, 2 * kShoulderL) - raw(t, 2 * kShoulderR),
                   raw(t, 2 * kShoulderL + 1) - raw(t, 2 * kShoulderR + 1));
    if (!(width > 0.0)) {
      throw DegenerateInput("normalize_keypoints: zero shoulder width at frame " +
                            std::to_string(t));
    }
    for (int j = 0; j < kNumJoints; ++j) {
      out(t, 2 * j) -= mx;
      out(t, 2 * j + 1) -= my;
    }
  }
  const double scale = 1.0 / mean_shoulder_width(out);
  out *= scale;
  return out;
}

std::map<int, SpeakerStats> compute_speaker_stats(
    const std::vector<SpeechUtterance>& corpus) {
  struct Acc {
    std::vector<double> pitch, energy;
  };
  std::map<int, Acc> acc;
  for (const auto& u : corpus) {
    auto& a = acc[u.speaker_id];
    a.pitch.insert(a.pitch.end(), u.true_prosody.pitch.begin(),
                   u.true_prosody.pitch.end());
    a.energy.insert(a.energy.end(), u.true_prosody.energy.begin(),
                    u.true_prosody.energy.end());
  }
  auto moments = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    return std::pair{m, std::sqrt(var / static_cast<double>(v.size()))};
  };
  std::map<int, SpeakerStats> out;
  for (const auto& [speaker, a] : acc) {
    const auto [mp, sp] = moments(a.pitch);
    const auto [me, se] = moments(a.energy);
    if (!(sp > 0.0) || !(se > 0.0)) {
      throw StatisticsError("speaker " + std::to_string(speaker) +
                            " has zero pitch or energy spread");
    }
    out[speaker] = SpeakerStats{mp, sp, me, se};
  }
  return out;
}

void write_sign_corpus(const std::vector<KeypointSequence>& corpus,
                       const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& clip : corpus) {
    json frames = json::array();
    for (int t = 0; t < clip.length(); ++t) {
      json frame = json::array();
      for (int j = 0; j < kNumJoints; ++j) {
        frame.push_back({clip.frames(t, 2 * j), clip.frames(t, 2 * j + 1)});
      }
      frames.push_back(std::move(frame));
    }
    json rec = {{"clip_id", clip.clip_id},
                {"arousal", clip.arousal},
                {"text", clip.text.ids},
                {"frames", std::move(frames)}};
    out << rec.dump() << '\n';
  }
}

std::vector<KeypointSequence> read_sign_corpus(const std::filesystem::path& path,
                                               int vocab_size) {
  std::vector<KeypointSequence> corpus;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      const json rec = json::parse(lines[i]);
      KeypointSequence clip;
      clip.clip_id = rec.at("clip_id").get<std::string>();
      clip.arousal = rec.at("arousal").get<double>();
      clip.text = text_from_json(rec.at("text"), vocab_size);
      const json& frames = rec.at("frames");
      clip.frames.resize(static_cast<Eigen::Index>(frames.size()), 2 * kNumJoints);
      for (std::size_t t = 0; t < frames.size(); ++t) {
        const json& frame = frames[t];
        if (frame.size() != kNumJoints) throw ParseError("frame must have 13 joints");
        for (int j = 0; j < kNumJoints; ++j) {
          const json& pt = frame[static_cast<std::size_t>(j)];
          if (pt.size() != 2) throw ParseError("joint must have 2 coordinates");
          clip.frames(static_cast<Eigen::Index>(t), 2 * j) = pt[0].get<double>();
          clip.frames(static_cast<Eigen::Index>(t), 2 * j + 1) = pt[1].get<double>();
        }
      }
      if (!(clip.arousal >= 0.0 && clip.arousal <= 1.0)) {
        throw ParseError("arousal outside [0, 1]");
      }
      corpus.push_back(std::move(clip));
    } catch (const std::exception& e) {
      throw ParseError("malformed " + record_label(path, i + 1, lines[i]) + ": " +
                       e.what());
    }
  }
  return corpus;
}

void write_mel(const MelSpectrogram& mel, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write("MEL1", 4);
  put_u32(out, static_cast<std::uint32_t>(mel.frames()));
  put_u32(out, static_cast<std::uint32_t>(mel.bins()));
  for (int r = 0; r < mel.frames(); ++r) {
    for (int b = 0; b < mel.bins(); ++b) {
      put_f32(out, static_cast<float>(mel.values(r, b)));
    }
  }
}

MelSpectrogram read_mel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open mel file " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MEL1", 4) != 0) {
    throw ParseError("bad mel magic in " + path.string());
  }
  std::uint32_t frames = 0, bins = 0;
  if (!get_u32(in, frames) || !get_u32(in, bins)) {
    throw ParseError("truncated mel header in " + path.string());
  }
  if (frames == 0 || bins == 0) throw ParseError("empty mel in " + path.string());
  MelSpectrogram mel;
  mel.values.resize(frames, bins);
  for (std::uint32_t r = 0; r < frames; ++r) {
    for (std::uint32_t b = 0; b < bins; ++b) {
      float f;
      if (!get_f32(in, f)) throw ParseError("truncated mel data in " + path.string());
      mel.values(r, b) = f;
    }
  }
  return mel;
}

void write_speech_corpus(const std::vector<SpeechUtterance>& corpus,
                         const std::filesystem::path& path) {
  const auto dir = path.has_parent_path() ? path.parent_path()
                                          : std::filesystem::path(".");
  std::filesystem::create_directories(dir);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& u : corpus) {
    const std::string mel_rel = "mels/" + u.utt_id + ".mel";
    write_mel(u.mel, dir / mel_rel);
    json rec = {{"utt_id", u.utt_id},
                {"speaker_id", u.speaker_id},
                {"text", u.text.ids},
                {"pitch", u.true_prosody.pitch},
                {"energy", u.true_prosody.energy},
                {"durations", u.true_prosody.durations},
                {"mel_path", mel_rel}};
    out << rec.dump() << '\n';
  }
}

std::vector<SpeechUtterance> read_speech_corpus(const std::filesystem::path& path,
                                                int vocab_size) {
  const auto dir = path.has_parent_path() ? path.parent_path()
                                          : std::filesystem::path(".");
  std::vector<SpeechUtterance> corpus;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      const json rec = json::parse(lines[i]);
      SpeechUtterance u;
      u.utt_id = rec.at("utt_id").get<std::string>();
      u.speaker_id = rec.at("speaker_id").get<int>();
      u.text = text_from_json(rec.at("text"), vocab_size);
      u.true_prosody.pitch = rec.at("pitch").get<std::vector<double>>();
      u.true_prosody.energy = rec.at("energy").get<std::vector<double>>();
      u.true_prosody.durations = rec.at("durations").get<std::vector<int>>();
      const std::size_t len = u.text.size();
      if (u.true_prosody.pitch.size() != len || u.true_prosody.energy.size() != len ||
          u.true_prosody.durations.size() != len) {
        throw ParseError("contour lengths differ from text length");
      }
      for (int d : u.true_prosody.durations) {
        if (d < 1) throw ParseError("duration below one frame");
        u.true_prosody.log_duration.push_back(std::log(static_cast<double>(d)));
      }
      u.mel = read_mel(dir / rec.at("mel_path").get<std::string>());
      if (u.mel.frames() != u.true_prosody.total_frames()) {
        throw ParseError("mel frame count differs from summed durations");
      }
      corpus.push_back(std::move(u));
    } catch (const std::exception& e) {
      throw ParseError("malformed " + record_label(path, i + 1, lines[i]) + ": " +
                       e.what());
    }
  }
  return corpus;
}

}  // namespace s2p::corpus
