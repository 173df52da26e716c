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

#include "s2p/losses.h"

#include <cmath>
#include <utility>

#include "s2p/errors.h"

namespace s2p::losses {

using ag::Index;
using ag::Matrix;

namespace {

Var c(double v) { return ag::constant(v); }

Var hinge(const Var& x) { return ag::relu(x); }

Var row_of(const std::vector<double>& v) {
  Matrix m(1, static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Index>(i)) = v[i];
  return ag::constant(std::move(m));
}

std::array<Var, sign_prosody::kNumChannels> label_rows(
    const sign_prosody::SignProsodyLabel& label) {
  std::array<Var, sign_prosody::kNumChannels> out;
  for (int m = 0; m < sign_prosody::kNumChannels; ++m) out[m] = row_of(label.histograms[m]);
  return out;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {lambda_weight, lambda_ir, lambda_sl, lambda_signrec, lambda_promo,
                   margin}) {
    if (!(std::isfinite(v) && v >= 0.0)) {
      throw ConfigError("loss weights must be finite and nonnegative");
    }
  }
}

Var weight_loss(const Var& w_sign) { return ag::abs(ag::add_scalar(ag::neg(w_sign), 1.0)); }
double weight_loss(double w_sign) { return weight_loss(c(w_sign)).scalar(); }

Var signrec_loss(const std::array<Var, sign_prosody::kNumChannels>& target,
                 const std::array<Var, sign_prosody::kNumChannels>& predicted) {
  Var total;
  for (int m = 0; m < sign_prosody::kNumChannels; ++m) {
    if (target[m].rows() != 1 || predicted[m].rows() != 1 ||
        target[m].cols() != predicted[m].cols()) {
      throw ContractViolation("signrec_loss: label and prediction bins differ");
    }
    const Var term = ag::sum(ag::mul(target[m], ag::clamped_log(predicted[m], kLogFloor)));
    total = m == 0 ? term : total + term;
  }
  return ag::scale(total, -1.0 / sign_prosody::kNumChannels);
}

Var signrec_loss(const sign_prosody::SignProsodyLabel& target,
                 const std::array<Var, sign_prosody::kNumChannels>& predicted) {
  return signrec_loss(label_rows(target), predicted);
}

double signrec_loss(
    const sign_prosody::SignProsodyLabel& target,
    const std::array<std::vector<double>, sign_prosody::kNumChannels>& predicted) {
  std::array<Var, sign_prosody::kNumChannels> p;
  for (int m = 0; m < sign_prosody::kNumChannels; ++m) p[m] = row_of(predicted[m]);
  return signrec_loss(target, p).scalar();
}

Var promo_loss(const Var& mu_energy, const Var& mu_pitch, const Var& mu_v_hand,
               const Var& mu_v_face, double margin) {
  return hinge(ag::add_scalar(ag::abs(mu_energy - mu_v_hand), -margin)) +
         hinge(ag::add_scalar(ag::abs(mu_pitch - mu_v_face), -margin));
}

double promo_loss(double mu_energy, double mu_pitch, double mu_v_hand,
                  double mu_v_face, double margin) {
  return promo_loss(c(mu_energy), c(mu_pitch), c(mu_v_hand), c(mu_v_face), margin)
      .scalar();
}

Var disc_loss(const Var& d_real, const Var& d_fake, DiscConvention convention) {
  const Var& one_side = convention == DiscConvention::kLsgan ? d_real : d_fake;
  const Var& zero_side = convention == DiscConvention::kLsgan ? d_fake : d_real;
  return ag::scale(ag::square(ag::add_scalar(ag::neg(one_side), 1.0)) +
                       ag::square(zero_side),
                   0.5);
}

double disc_loss(double d_real, double d_fake, DiscConvention convention) {
  return disc_loss(c(d_real), c(d_fake), convention).scalar();
}

Var adv_loss(const Var& d_fake) { return ag::square(ag::add_scalar(ag::neg(d_fake), 1.0)); }
double adv_loss(double d_fake) { return adv_loss(c(d_fake)).scalar(); }

Var ir_loss(const Var& std_pitch_g, const Var& std_energy_g, const Var& std_pitch_t,
            const Var& std_energy_t, IrDirection direction) {
  if (direction == IrDirection::kFormula) {
    return hinge(std_pitch_g - std_pitch_t) + hinge(std_energy_g - std_energy_t);
  }
  return hinge(std_pitch_t - std_pitch_g) + hinge(std_energy_t - std_energy_g);
}

double ir_loss(double std_pitch_g, double std_energy_g, double std_pitch_t,
               double std_energy_t, IrDirection direction) {
  return ir_loss(c(std_pitch_g), c(std_energy_g), c(std_pitch_t), c(std_energy_t),
                 direction)
      .scalar();
}

Var sl_loss(const Var& mean_pitch_g, const Var& mean_energy_g,
            const corpus::SpeakerStats& stats) {
  return hinge(ag::add_scalar(ag::abs(ag::add_scalar(mean_pitch_g, -stats.mean_pitch)),
                              -3.0 * stats.std_pitch)) +
         hinge(ag::add_scalar(ag::abs(ag::add_scalar(mean_energy_g, -stats.mean_energy)),
                              -3.0 * stats.std_energy));
}

double sl_loss(double mean_pitch_g, double mean_energy_g,
               const corpus::SpeakerStats& stats) {
  return sl_loss(c(mean_pitch_g), c(mean_energy_g), stats).scalar();
}

Var natural_loss(const Var& adv, const Var& ir, const Var& sl, const LossWeights& w) {
  return adv + ag::scale(ir, w.lambda_ir) + ag::scale(sl, w.lambda_sl);
}

double natural_loss(double adv, double ir, double sl, const LossWeights& w) {
  return adv + w.lambda_ir * ir + w.lambda_sl * sl;
}

Var total_loss(const Var& natural, const Var& signrec, const Var& promo,
               const Var& weight, const LossWeights& w) {
  return natural + ag::scale(signrec, w.lambda_signrec) +
         ag::scale(promo, w.lambda_promo) + ag::scale(weight, w.lambda_weight);
}

double total_loss(double natural, double signrec, double promo, double weight,
                  const LossWeights& w) {
  return natural + w.lambda_signrec * signrec + w.lambda_promo * promo +
         w.lambda_weight * weight;
}

Var masked_mean(const Var& column, const std::vector<bool>& mask) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) rows.push_back(static_cast<Index>(i));
  }
  if (rows.empty()) throw ContractViolation("masked_mean: no unmasked rows");
  if (rows.size() == mask.size()) return ag::mean(column);
  return ag::mean(ag::gather_rows(column, rows));
}

Var masked_std(const Var& column, const std::vector<bool>& mask) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) rows.push_back(static_cast<Index>(i));
  }
  if (rows.empty()) throw ContractViolation("masked_std: no unmasked rows");
  const Var x = rows.size() == mask.size() ? column : ag::gather_rows(column, rows);
  const Var mu = ag::mean(x);
  const Var centered = ag::add_row(x, ag::neg(mu));
  return ag::sqrt(ag::add_scalar(ag::mean(ag::square(centered)), kStdEps));
}

nlohmann::json LossReport::to_json() const {
  return {{"adv", adv},         {"ir", ir},
          {"sl", sl},           {"natural", natural},
          {"signrec", signrec}, {"promo", promo},
          {"weight", weight},   {"total", total},
          {"disc", disc},       {"w_sign", w_sign},
          {"disc_accuracy", disc_accuracy},
          {"clamped_durations", clamped_durations}};
}

std::string LossReport::first_non_finite() const {
  const std::pair<const char*, double> parts[] = {
      {"adv", adv},         {"ir", ir},       {"sl", sl},
      {"natural", natural}, {"signrec", signrec}, {"promo", promo},
      {"weight", weight},   {"total", total}, {"disc", disc}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) return name;
  }
  return {};
}

}  // namespace s2p::losses
