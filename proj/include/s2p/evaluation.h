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

// Expressiveness metrics, the loss-toggle ablation suite, arousal contrast
// and report/plot output.

#ifndef S2P_EVALUATION_H_
#define S2P_EVALUATION_H_

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2p/corpus.h"
#include "s2p/prosody.h"
#include "s2p/trainer.h"
#include "s2p/tts_backbone.h"

namespace s2p::eval {

inline constexpr char kReportSchema[] = "EVAL1";

struct ExpressivenessReport {
  double dataset_std_pitch = 0.0;
  double dataset_std_energy = 0.0;
  double mean_per_sample_std_pitch = 0.0;
  double mean_per_sample_std_energy = 0.0;
  int samples = 0;

  nlohmann::json to_json() const;
};

// Population standard deviation.
double population_std(const std::vector<double>& values);

// Pooled and per-sample-mean stds; per-sample means only use samples with
// at least two values. Throws StatisticsError on empty input.
ExpressivenessReport expressiveness(const std::vector<ProsodyContours>& samples);

// Speaker used for test item i.
inline int test_speaker(std::size_t index, int n_speakers) {
  return static_cast<int>(index % static_cast<std::size_t>(n_speakers));
}

// Sign-conditioned contours (and mels) for each clip, using its own text.
std::vector<tts::Synthesis> synthesize_clips(const train::TrainState& state,
                                             const std::vector<corpus::KeypointSequence>& clips,
                                             int n_speakers);
// Two-stage baseline on the same texts and speakers.
std::vector<tts::Synthesis> two_stage_clips(const tts::Backbone& backbone,
                                            const std::vector<corpus::KeypointSequence>& clips,
                                            int n_speakers);
std::vector<ProsodyContours> contours_of(const std::vector<tts::Synthesis>& items);

struct AblationRow {
  std::string name;
  bool two_stage = false;
  bool natural = false;
  bool signrec = false;
  bool promo = false;
  ExpressivenessReport expressiveness;
  // Mean of each loss component over the last (up to 50) steps.
  nlohmann::json final_losses = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// Two-stage baseline plus the four toggle rows (all off, natural only,
// natural + signrec, full), each trained from the same seed and backbone.
std::vector<AblationRow> ablation_suite(const train::TrainConfig& base,
                                        const tts::Backbone& backbone,
                                        const train::TrainData& data);
// One ablation row for a single toggle triple.
AblationRow ablation_row(const std::string& name, const train::TrainConfig& base,
                         bool natural, bool signrec, bool promo,
                         const tts::Backbone& backbone, const train::TrainData& data);
AblationRow two_stage_row(const tts::Backbone& backbone, const train::TrainData& data);

std::string format_ablation_table(const std::vector<AblationRow>& rows);

struct RankSumResult {
  double u = 0.0;        // U statistic of the first group
  double z = 0.0;        // normal approximation with tie correction
  double p_greater = 1.0;  // one-sided: first group tends to be larger
};

// Mann-Whitney U test of `a` against `b`.
RankSumResult rank_sum(const std::vector<double>& a, const std::vector<double>& b);

struct ContrastReport {
  int n_high = 0;
  int n_low = 0;
  double median_arousal = 0.0;
  double high_pitch_std = 0.0;
  double low_pitch_std = 0.0;
  double high_energy_std = 0.0;
  double low_energy_std = 0.0;
  double delta_pitch_std = 0.0;
  double delta_energy_std = 0.0;
  RankSumResult energy_test;
  RankSumResult pitch_test;

  nlohmann::json to_json() const;
};

// Splits clips at the arousal median (the lower half by rank is "low")
// and compares per-sample contour stds. Needs >= 10 clips per group.
ContrastReport arousal_contrast(const std::vector<ProsodyContours>& contours,
                                const std::vector<corpus::KeypointSequence>& clips);
ContrastReport arousal_contrast(const train::TrainState& state,
                                const std::vector<corpus::KeypointSequence>& clips,
                                int n_speakers);

void write_report(const nlohmann::json& body, const std::filesystem::path& path);
nlohmann::json read_report(const std::filesystem::path& path);

struct PlotInfo {
  int width = 0;
  int height = 0;
  int frames = 0;                 // x-axis extent in frames
  std::vector<int> series_per_channel;
};

inline constexpr int kPixelsPerFrame = 4;
inline constexpr int kPixelsPerBin = 12;

// Heatmap with one kPixelsPerFrame-wide column per frame.
PlotInfo plot_mel(const corpus::MelSpectrogram& mel, const std::filesystem::path& path);

// Pitch and energy panels, each overlaying the generated and the two-stage
// contour at frame rate.
PlotInfo plot_contours(const ProsodyContours& generated, const ProsodyContours& two_stage,
                       const std::filesystem::path& path);

}  // namespace s2p::eval

#endif  // S2P_EVALUATION_H_
