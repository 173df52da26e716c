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

// Training objectives. Each loss has a graph form over 1x1 Vars (for
// training and gradient checks) and a plain double form.

#ifndef S2P_LOSSES_H_
#define S2P_LOSSES_H_

#include <array>
#include <string>
#include <vector>

#include "json.hpp"
#include "s2p/autograd.h"
#include "s2p/corpus.h"
#include "s2p/sign_prosody.h"

namespace s2p::losses {

using ag::Var;

struct LossWeights {
  double lambda_weight = 0.1;
  double lambda_ir = 1.0;
  double lambda_sl = 1.0;
  double lambda_signrec = 1.0;
  double lambda_promo = 0.1;
  double margin = 0.5;  // ProMo hinge margin c

  void validate() const;
};

// Which side the discriminator labels 1. kLsgan: real -> 1, fake -> 0.
// kInverted: fake -> 1, real -> 0 (config value "paper").
enum class DiscConvention { kLsgan, kInverted };

// kFormula penalizes generated stds above the two-stage stds; kProse
// penalizes them below.
enum class IrDirection { kFormula, kProse };

inline constexpr double kLogFloor = 1e-12;
inline constexpr double kStdEps = 1e-12;

// |1 - w_sign|
Var weight_loss(const Var& w_sign);
double weight_loss(double w_sign);

// -(1/4) sum_M sum_k P_M(k) log max(P^_M(k), 1e-12). Each entry of
// `target` and `predicted` is 1 x S.
Var signrec_loss(const std::array<Var, sign_prosody::kNumChannels>& target,
                 const std::array<Var, sign_prosody::kNumChannels>& predicted);
Var signrec_loss(const sign_prosody::SignProsodyLabel& target,
                 const std::array<Var, sign_prosody::kNumChannels>& predicted);
double signrec_loss(const sign_prosody::SignProsodyLabel& target,
                    const std::array<std::vector<double>, sign_prosody::kNumChannels>&
                        predicted);

// max(|mu_e - mu_vh| - c, 0) + max(|mu_p - mu_vf| - c, 0)
Var promo_loss(const Var& mu_energy, const Var& mu_pitch, const Var& mu_v_hand,
               const Var& mu_v_face, double margin);
double promo_loss(double mu_energy, double mu_pitch, double mu_v_hand,
                  double mu_v_face, double margin);

Var disc_loss(const Var& d_real, const Var& d_fake,
              DiscConvention convention = DiscConvention::kLsgan);
double disc_loss(double d_real, double d_fake,
                 DiscConvention convention = DiscConvention::kLsgan);

// |1 - d_fake|^2
Var adv_loss(const Var& d_fake);
double adv_loss(double d_fake);

Var ir_loss(const Var& std_pitch_g, const Var& std_energy_g, const Var& std_pitch_t,
            const Var& std_energy_t, IrDirection direction = IrDirection::kFormula);
double ir_loss(double std_pitch_g, double std_energy_g, double std_pitch_t,
               double std_energy_t, IrDirection direction = IrDirection::kFormula);

// Hinge on leaving the speaker's mean +/- 3 std interval.
Var sl_loss(const Var& mean_pitch_g, const Var& mean_energy_g,
            const corpus::SpeakerStats& stats);
double sl_loss(double mean_pitch_g, double mean_energy_g,
               const corpus::SpeakerStats& stats);

Var natural_loss(const Var& adv, const Var& ir, const Var& sl, const LossWeights& w);
double natural_loss(double adv, double ir, double sl, const LossWeights& w);

Var total_loss(const Var& natural, const Var& signrec, const Var& promo,
               const Var& weight, const LossWeights& w);
double total_loss(double natural, double signrec, double promo, double weight,
                  const LossWeights& w);

// Mean and population std (with kStdEps under the root) of an L x 1
// column over unmasked rows.
Var masked_mean(const Var& column, const std::vector<bool>& mask);
Var masked_std(const Var& column, const std::vector<bool>& mask);

struct LossReport {
  double adv = 0.0;
  double ir = 0.0;
  double sl = 0.0;
  double natural = 0.0;
  double signrec = 0.0;
  double promo = 0.0;
  double weight = 0.0;
  double total = 0.0;
  double disc = 0.0;
  double w_sign = 0.0;
  double disc_accuracy = 0.0;
  int clamped_durations = 0;

  nlohmann::json to_json() const;
  // Name of the first non-finite loss component, or empty.
  std::string first_non_finite() const;
};

}  // namespace s2p::losses

#endif  // S2P_LOSSES_H_
