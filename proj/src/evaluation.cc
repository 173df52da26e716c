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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "s2p/errors.h"
#include "s2p/sign_branch.h"

namespace s2p::eval {

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Frame-rate expansion of a per-phoneme contour.
std::vector<double> expand(const std::vector<double>& values, const std::vector<int>& durations) {
  std::vector<double> out;
  for (std::size_t i = 0; i < values.size() && i < durations.size(); ++i) {
    out.insert(out.end(), static_cast<std::size_t>(std::max(durations[i], 0)), values[i]);
  }
  return out;
}

}  // namespace

double population_std(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double m = mean_of(values);
  double var = 0.0;
  for (double v : values) var += (v - m) * (v - m);
  return std::sqrt(var / static_cast<double>(values.size()));
}

nlohmann::json ExpressivenessReport::to_json() const {
  return {{"dataset_std_pitch", dataset_std_pitch},
          {"dataset_std_energy", dataset_std_energy},
          {"mean_per_sample_std_pitch", mean_per_sample_std_pitch},
          {"mean_per_sample_std_energy", mean_per_sample_std_energy},
          {"samples", samples}};
}

ExpressivenessReport expressiveness(const std::vector<ProsodyContours>& samples) {
  if (samples.empty()) throw StatisticsError("expressiveness: no samples");
  ExpressivenessReport r;
  r.samples = static_cast<int>(samples.size());
  std::vector<double> all_p, all_e, per_p, per_e;
  for (const auto& s : samples) {
    all_p.insert(all_p.end(), s.pitch.begin(), s.pitch.end());
    all_e.insert(all_e.end(), s.energy.begin(), s.energy.end());
    if (s.pitch.size() >= 2) per_p.push_back(population_std(s.pitch));
    if (s.energy.size() >= 2) per_e.push_back(population_std(s.energy));
  }
  if (all_p.empty()) throw StatisticsError("expressiveness: samples hold no values");
  r.dataset_std_pitch = population_std(all_p);
  r.dataset_std_energy = population_std(all_e);
  r.mean_per_sample_std_pitch = mean_of(per_p);
  r.mean_per_sample_std_energy = mean_of(per_e);
  return r;
}

std::vector<tts::Synthesis> synthesize_clips(
    const train::TrainState& state, const std::vector<corpus::KeypointSequence>& clips,
    int n_speakers) {
  std::vector<tts::Synthesis> out;
  out.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    nn::Binder b;
    const auto g = sign::generate(state.backbone(), state.branch(), b, clips[i].text,
                                  clips[i], test_speaker(i, n_speakers));
    tts::Synthesis s;
    s.mel.values = g.mel.value();
    s.contours = tts::to_contours(g.adapm.mixed);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<tts::Synthesis> two_stage_clips(const tts::Backbone& backbone,
                                            const std::vector<corpus::KeypointSequence>& clips,
                                            int n_speakers) {
  std::vector<tts::Synthesis> out;
  out.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    out.push_back(tts::two_stage_synthesize(backbone, clips[i].text,
                                            test_speaker(i, n_speakers)));
  }
  return out;
}

std::vector<ProsodyContours> contours_of(const std::vector<tts::Synthesis>& items) {
  std::vector<ProsodyContours> out;
  out.reserve(items.size());
  for (const auto& s : items) out.push_back(s.contours);
  return out;
}

nlohmann::json AblationRow::to_json() const {
  return {{"name", name},
          {"two_stage", two_stage},
          {"natural", natural},
          {"signrec", signrec},
          {"promo", promo},
          {"expressiveness", expressiveness.to_json()},
          {"final_losses", final_losses}};
}

AblationRow two_stage_row(const tts::Backbone& backbone, const train::TrainData& data) {
  AblationRow row;
  row.name = "two_stage";
  row.two_stage = true;
  row.expressiveness =
      expressiveness(contours_of(two_stage_clips(backbone, data.test_clips, data.n_speakers)));
  return row;
}

AblationRow ablation_row(const std::string& name, const train::TrainConfig& base,
                         bool natural, bool signrec, bool promo,
                         const tts::Backbone& backbone, const train::TrainData& data) {
  train::TrainConfig cfg = base;
  cfg.use_natural = natural;
  cfg.use_signrec = signrec;
  cfg.use_promo = promo;
  train::TrainState state(cfg, backbone.clone());
  const auto records = train::train(state, data);
  AblationRow row;
  row.name = name;
  row.natural = natural;
  row.signrec = signrec;
  row.promo = promo;
  row.expressiveness =
      expressiveness(contours_of(synthesize_clips(state, data.test_clips, data.n_speakers)));
  const std::size_t window = std::min<std::size_t>(50, records.size());
  if (window > 0) {
    for (const char* key : {"adv", "ir", "sl", "natural", "signrec", "promo", "weight",
                            "total", "disc", "disc_accuracy", "w_sign"}) {
      double sum = 0.0;
      for (std::size_t i = records.size() - window; i < records.size(); ++i) {
        sum += records[i].at(key).get<double>();
      }
      row.final_losses[key] = sum / static_cast<double>(window);
    }
  }
  return row;
}

std::vector<AblationRow> ablation_suite(const train::TrainConfig& base,
                                        const tts::Backbone& backbone,
                                        const train::TrainData& data) {
  std::vector<AblationRow> rows;
  rows.push_back(two_stage_row(backbone, data));
  rows.push_back(ablation_row("none", base, false, false, false, backbone, data));
  rows.push_back(ablation_row("natural", base, true, false, false, backbone, data));
  rows.push_back(ablation_row("natural+signrec", base, true, true, false, backbone, data));
  rows.push_back(ablation_row("full", base, true, true, true, backbone, data));
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  auto mark = [](bool on) { return on ? "x" : "-"; };
  os << std::left << std::setw(18) << "method" << std::setw(9) << "natural" << std::setw(9)
     << "signrec" << std::setw(7) << "promo" << std::setw(12) << "pitch_std" << std::setw(12)
     << "energy_std" << std::setw(14) << "pitch_std_ps" << "energy_std_ps\n";
  os << std::fixed << std::setprecision(5);
  for (const auto& r : rows) {
    os << std::setw(18) << r.name;
    if (r.two_stage) {
      os << std::setw(9) << "" << std::setw(9) << "" << std::setw(7) << "";
    } else {
      os << std::setw(9) << mark(r.natural) << std::setw(9) << mark(r.signrec) << std::setw(7)
         << mark(r.promo);
    }
    os << std::setw(12) << r.expressiveness.dataset_std_pitch << std::setw(12)
       << r.expressiveness.dataset_std_energy << std::setw(14)
       << r.expressiveness.mean_per_sample_std_pitch
       << r.expressiveness.mean_per_sample_std_energy << "\n";
  }
  return os.str();
}

RankSumResult rank_sum(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw StatisticsError("rank_sum: empty group");
  struct Item {
    double value;
    int group;
  };
  std::vector<Item> items;
  for (double v : a) items.push_back({v, 0});
  for (double v : b) items.push_back({v, 1});
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& x, const Item& y) { return x.value < y.value; });
  const auto n = static_cast<double>(items.size());
  double rank_a = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].value == items[i].value) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    const auto t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].group == 0) rank_a += avg_rank;
    }
    i = j;
  }
  const auto n1 = static_cast<double>(a.size());
  const auto n2 = static_cast<double>(b.size());
  RankSumResult r;
  r.u = rank_a - n1 * (n1 + 1.0) / 2.0;
  const double mean_u = n1 * n2 / 2.0;
  const double var_u = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var_u <= 0.0) {
    r.z = 0.0;
    r.p_greater = 0.5;
    return r;
  }
  // Continuity-corrected normal approximation.
  const double diff = r.u - mean_u;
  const double corrected = diff > 0.5 ? diff - 0.5 : (diff < -0.5 ? diff + 0.5 : 0.0);
  r.z = corrected / std::sqrt(var_u);
  r.p_greater = 0.5 * std::erfc(r.z / std::sqrt(2.0));
  return r;
}

nlohmann::json ContrastReport::to_json() const {
  auto test = [](const RankSumResult& t) {
    return nlohmann::json{{"u", t.u}, {"z", t.z}, {"p_greater", t.p_greater}};
  };
  return {{"n_high", n_high},
          {"n_low", n_low},
          {"median_arousal", median_arousal},
          {"high_pitch_std", high_pitch_std},
          {"low_pitch_std", low_pitch_std},
          {"high_energy_std", high_energy_std},
          {"low_energy_std", low_energy_std},
          {"delta_pitch_std", delta_pitch_std},
          {"delta_energy_std", delta_energy_std},
          {"energy_rank_sum", test(energy_test)},
          {"pitch_rank_sum", test(pitch_test)}};
}

ContrastReport arousal_contrast(const std::vector<ProsodyContours>& contours,
                                const std::vector<corpus::KeypointSequence>& clips) {
  if (contours.size() != clips.size()) {
    throw ContractViolation("arousal_contrast: contour and clip counts differ");
  }
  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return clips[x].arousal < clips[y].arousal;
  });
  const std::size_t half = clips.size() / 2;
  ContrastReport r;
  r.n_low = static_cast<int>(half);
  r.n_high = static_cast<int>(half);
  if (r.n_low < 10) {
    throw StatisticsError("arousal_contrast: need at least 10 clips per group, got " +
                          std::to_string(r.n_low));
  }
  const std::size_t n = clips.size();
  r.median_arousal = n % 2 == 1 ? clips[order[half]].arousal
                                : 0.5 * (clips[order[half - 1]].arousal +
                                         clips[order[half]].arousal);
  std::vector<double> low_p, low_e, high_p, high_e;
  for (std::size_t k = 0; k < half; ++k) {
    const auto& lo = contours[order[k]];
    const auto& hi = contours[order[n - 1 - k]];
    low_p.push_back(population_std(lo.pitch));
    low_e.push_back(population_std(lo.energy));
    high_p.push_back(population_std(hi.pitch));
    high_e.push_back(population_std(hi.energy));
  }
  r.high_pitch_std = mean_of(high_p);
  r.low_pitch_std = mean_of(low_p);
  r.high_energy_std = mean_of(high_e);
  r.low_energy_std = mean_of(low_e);
  r.delta_pitch_std = r.high_pitch_std - r.low_pitch_std;
  r.delta_energy_std = r.high_energy_std - r.low_energy_std;
  r.energy_test = rank_sum(high_e, low_e);
  r.pitch_test = rank_sum(high_p, low_p);
  return r;
}

ContrastReport arousal_contrast(const train::TrainState& state,
                                const std::vector<corpus::KeypointSequence>& clips,
                                int n_speakers) {
  return arousal_contrast(contours_of(synthesize_clips(state, clips, n_speakers)), clips);
}

void write_report(const nlohmann::json& body, const std::filesystem::path& path) {
  nlohmann::json doc = body;
  doc["schema"] = kReportSchema;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write report " + path.string());
  os << doc.dump(2) << '\n';
  if (!os) throw Error("failed writing report " + path.string());
}

nlohmann::json read_report(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot read report " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (doc.value("schema", "") != kReportSchema) {
    throw ParseError(path.string() + ": not an EVAL1 report");
  }
  return doc;
}

PlotInfo plot_mel(const corpus::MelSpectrogram& mel, const std::filesystem::path& path) {
  const int frames = mel.frames();
  const int bins = mel.bins();
  if (frames < 1 || bins < 1) throw ContractViolation("plot_mel: empty mel");
  const double lo = mel.values.minCoeff();
  const double hi = mel.values.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  cv::Mat gray(bins * kPixelsPerBin, frames * kPixelsPerFrame, CV_8UC1);
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < bins; ++k) {
      const auto level =
          static_cast<unsigned char>(std::lround(255.0 * (mel.values(t, k) - lo) / span));
      // Low bins at the bottom.
      const cv::Rect cell(t * kPixelsPerFrame, (bins - 1 - k) * kPixelsPerBin,
                          kPixelsPerFrame, kPixelsPerBin);
      gray(cell).setTo(level);
    }
  }
  cv::Mat color;
  cv::applyColorMap(gray, color, cv::COLORMAP_VIRIDIS);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), color)) throw Error("cannot write plot " + path.string());
  return {color.cols, color.rows, frames, {}};
}

PlotInfo plot_contours(const ProsodyContours& generated, const ProsodyContours& two_stage,
                       const std::filesystem::path& path) {
  constexpr int kPanel = 160;
  constexpr int kMargin = 8;
  const std::vector<double>* series[2][2] = {{&generated.pitch, &two_stage.pitch},
                                             {&generated.energy, &two_stage.energy}};
  const std::vector<int>* durs[2] = {&generated.durations, &two_stage.durations};
  const int frames = std::max(generated.total_frames(), two_stage.total_frames());
  if (frames < 1) throw ContractViolation("plot_contours: empty contours");
  const int width = frames * kPixelsPerFrame;
  cv::Mat img(2 * kPanel, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Scalar colors[2] = {cv::Scalar(40, 40, 220), cv::Scalar(200, 120, 30)};
  PlotInfo info{width, img.rows, frames, {}};
  for (int ch = 0; ch < 2; ++ch) {
    const int top = ch * kPanel;
    cv::line(img, {0, top + kPanel - 1}, {width - 1, top + kPanel - 1},
             cv::Scalar(180, 180, 180));
    int drawn = 0;
    for (int s = 0; s < 2; ++s) {
      const std::vector<double> values = expand(*series[ch][s], *durs[s]);
      if (values.empty()) continue;
      std::vector<cv::Point> pts;
      for (std::size_t t = 0; t < values.size(); ++t) {
        const double v = std::clamp(values[t], 0.0, 1.0);
        const int y = top + kMargin +
                      static_cast<int>(std::lround((1.0 - v) * (kPanel - 2 * kMargin - 1)));
        pts.emplace_back(static_cast<int>(t) * kPixelsPerFrame + kPixelsPerFrame / 2, y);
      }
      cv::polylines(img, pts, false, colors[s], 2);
      ++drawn;
    }
    info.series_per_channel.push_back(drawn);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) throw Error("cannot write plot " + path.string());
  return info;
}

}  // namespace s2p::eval
