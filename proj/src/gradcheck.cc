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

#include "s2p/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "s2p/corpus.h"
#include "s2p/losses.h"
#include "s2p/rng.h"
#include "s2p/sign_branch.h"
#include "s2p/tts_backbone.h"

namespace s2p::gradcheck {

using ag::Index;

namespace {

std::vector<Index> sample_entries(Index size, int count, std::mt19937_64& rng) {
  std::vector<Index> all(static_cast<std::size_t>(size));
  std::iota(all.begin(), all.end(), Index{0});
  if (size <= count) return all;
  // Partial Fisher-Yates with the portable sampler.
  for (int i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, i, size - 1));
    std::swap(all[static_cast<std::size_t>(i)], all[j]);
  }
  all.resize(static_cast<std::size_t>(count));
  std::sort(all.begin(), all.end());
  return all;
}

void record(Result& r, double analytic, double numeric, const Options& o) {
  const double e = relative_error(analytic, numeric, o.floor);
  r.max_rel_error = std::max(r.max_rel_error, std::isfinite(e) ? e : 1e300);
  ++r.entries;
}

Matrix random_matrix(Index rows, Index cols, double scale, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

Matrix random_unit(Index rows, Index cols, double lo, double hi, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

Var weighted_sum(const Var& x, const Matrix& w) { return ag::sum(ag::mul(x, ag::constant(w))); }

corpus::PhonemeSequence short_text(std::mt19937_64& rng, int length, int vocab) {
  corpus::PhonemeSequence t;
  t.vocab_size = vocab;
  for (int i = 0; i < length; ++i) t.ids.push_back(static_cast<int>(uniform_int(rng, 0, vocab - 1)));
  return t;
}

// A 30-frame normalized clip.
corpus::KeypointSequence short_clip(std::uint64_t seed) {
  corpus::CorpusConfig cfg;
  auto clips = corpus::gen_sign_corpus(1, seed, cfg);
  auto clip = clips.front();
  clip.frames = corpus::normalize_keypoints(clip.frames.topRows(30).eval());
  return clip;
}

// Gives the zero-initialized heads nonzero values so gradients reach every
// AdaPM parameter.
void perturb(nn::ParamList& params, const std::string& prefix, std::mt19937_64& rng) {
  for (auto* p : params) {
    if (p->name.rfind(prefix, 0) == 0) {
      p->value = random_matrix(p->value.rows(), p->value.cols(), 0.3, rng);
    }
  }
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

Result check_params(const std::string& name, const nn::ParamList& params,
                    const std::function<Var(nn::Binder&)>& f, const Options& options) {
  Result r;
  r.name = name;
  std::vector<Matrix> analytic;
  {
    nn::Binder b(params);
    const Var out = f(b);
    ag::backward(out);
    for (const auto* p : params) analytic.push_back(b.grad(*p));
  }
  std::mt19937_64 rng(splitmix64(options.seed ^ std::hash<std::string>{}(name)));
  for (std::size_t k = 0; k < params.size(); ++k) {
    nn::Parameter& p = *params[k];
    for (Index idx : sample_entries(p.value.size(), options.entries_per_tensor, rng)) {
      const double orig = p.value.data()[idx];
      // Fresh binders: a binder caches the values it has bound.
      nn::Binder up_binder;
      nn::Binder down_binder;
      p.value.data()[idx] = orig + options.eps;
      const double up = f(up_binder).scalar();
      p.value.data()[idx] = orig - options.eps;
      const double down = f(down_binder).scalar();
      p.value.data()[idx] = orig;
      record(r, analytic[k].data()[idx], (up - down) / (2.0 * options.eps), options);
    }
  }
  r.passed = r.max_rel_error < options.tolerance;
  return r;
}

Result check_inputs(const std::string& name, std::vector<Matrix> inputs,
                    const std::function<Var(const std::vector<Var>&)>& f,
                    const Options& options) {
  Result r;
  r.name = name;
  std::vector<Var> leaves;
  for (const auto& m : inputs) leaves.push_back(ag::leaf(m));
  ag::backward(f(leaves));
  std::vector<Matrix> analytic;
  for (const auto& v : leaves) analytic.push_back(v.grad());
  std::mt19937_64 rng(splitmix64(options.seed ^ std::hash<std::string>{}(name)));
  auto eval = [&]() {
    std::vector<Var> consts;
    for (const auto& m : inputs) consts.push_back(ag::constant(m));
    return f(consts).scalar();
  };
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Index idx : sample_entries(inputs[k].size(), options.entries_per_tensor, rng)) {
      const double orig = inputs[k].data()[idx];
      inputs[k].data()[idx] = orig + options.eps;
      const double up = eval();
      inputs[k].data()[idx] = orig - options.eps;
      const double down = eval();
      inputs[k].data()[idx] = orig;
      record(r, analytic[k].data()[idx], (up - down) / (2.0 * options.eps), options);
    }
  }
  r.passed = r.max_rel_error < options.tolerance;
  return r;
}

std::vector<Result> run_suite(const Options& options) {
  std::vector<Result> out;
  std::mt19937_64 rng(splitmix64(options.seed ^ 0x9c4ecULL));
  auto scalar = [](double v) { return Matrix::Constant(1, 1, v); };
  auto at = [](const std::vector<Var>& v, std::size_t i) { return v[i]; };
  const losses::LossWeights w;
  constexpr double kOff = 1e-3;  // distance from hinge kinks

  out.push_back(check_inputs("weight_loss", {scalar(0.7)}, [](const std::vector<Var>& v) {
    return losses::weight_loss(v[0]);
  }, options));
  for (double side : {-kOff, kOff}) {
    out.push_back(check_inputs("weight_loss@kink" + std::string(side < 0 ? "-" : "+"),
                               {scalar(1.0 + side)}, [](const std::vector<Var>& v) {
                                 return losses::weight_loss(v[0]);
                               }, options));
  }

  {
    std::vector<Matrix> inputs;
    for (int m = 0; m < 4; ++m) {
      Matrix p = random_unit(1, 8, 0.0, 1.0, rng);
      p(0, 3) = 0.0;  // zero-mass bins contribute nothing
      inputs.push_back(p / p.sum() * (29.0 / 30.0));
    }
    for (int m = 0; m < 4; ++m) {
      Matrix q = random_unit(1, 8, 0.05, 1.0, rng);
      inputs.push_back(q / q.sum());
    }
    out.push_back(check_inputs("signrec_loss", inputs, [](const std::vector<Var>& v) {
      return losses::signrec_loss(std::array<Var, 4>{v[0], v[1], v[2], v[3]},
                                  std::array<Var, 4>{v[4], v[5], v[6], v[7]});
    }, options));
  }

  // ProMo: each hinge just inside and just outside the margin.
  for (double side : {-kOff, kOff}) {
    const double gap = w.margin + side;
    out.push_back(check_inputs(
        std::string("promo_loss@margin") + (side < 0 ? "-" : "+"),
        {scalar(0.3 + gap), scalar(-0.2 - gap), scalar(0.3), scalar(-0.2)},
        [&](const std::vector<Var>& v) {
          return losses::promo_loss(at(v, 0), at(v, 1), at(v, 2), at(v, 3), w.margin);
        }, options));
  }
  out.push_back(check_inputs("promo_loss", {scalar(1.4), scalar(-0.9), scalar(0.1), scalar(0.6)},
                             [&](const std::vector<Var>& v) {
                               return losses::promo_loss(v[0], v[1], v[2], v[3], w.margin);
                             }, options));

  for (auto conv : {losses::DiscConvention::kLsgan, losses::DiscConvention::kInverted}) {
    out.push_back(check_inputs(
        conv == losses::DiscConvention::kLsgan ? "disc_loss" : "disc_loss[inverted]",
        {scalar(0.8), scalar(0.3)},
        [conv](const std::vector<Var>& v) { return losses::disc_loss(v[0], v[1], conv); },
        options));
  }
  out.push_back(check_inputs("adv_loss", {scalar(0.35)}, [](const std::vector<Var>& v) {
    return losses::adv_loss(v[0]);
  }, options));

  for (auto dir : {losses::IrDirection::kFormula, losses::IrDirection::kProse}) {
    for (double side : {-kOff, kOff}) {
      const std::string tag = std::string(dir == losses::IrDirection::kFormula ? "" : "[prose]") +
                              (side < 0 ? "@kink-" : "@kink+");
      out.push_back(check_inputs("ir_loss" + tag,
                                 {scalar(0.2 + side), scalar(0.1 - side), scalar(0.2),
                                  scalar(0.1)},
                                 [dir](const std::vector<Var>& v) {
                                   return losses::ir_loss(v[0], v[1], v[2], v[3], dir);
                                 }, options));
    }
  }

  corpus::SpeakerStats spk{0.4, 0.05, 0.3, 0.04};
  for (double side : {-kOff, kOff}) {
    out.push_back(check_inputs(std::string("sl_loss@boundary") + (side < 0 ? "-" : "+"),
                               {scalar(0.4 + 3 * 0.05 + side), scalar(0.3 - 3 * 0.04 - side)},
                               [spk](const std::vector<Var>& v) {
                                 return losses::sl_loss(v[0], v[1], spk);
                               }, options));
  }
  out.push_back(check_inputs("natural_loss", {scalar(0.25), scalar(2.0), scalar(1.0)},
                             [&](const std::vector<Var>& v) {
                               return losses::natural_loss(v[0], v[1], v[2], w);
                             }, options));
  out.push_back(check_inputs("total_loss", {scalar(1.0), scalar(0.2), scalar(0.3), scalar(0.5)},
                             [&](const std::vector<Var>& v) {
                               return losses::total_loss(v[0], v[1], v[2], v[3], w);
                             }, options));
  out.push_back(check_inputs("masked_std", {random_unit(8, 1, 0.1, 0.9, rng)},
                             [](const std::vector<Var>& v) {
                               std::vector<bool> mask(8, true);
                               mask[6] = mask[7] = false;
                               return losses::masked_std(v[0], mask);
                             }, options));

  // Networks.
  tts::BackboneConfig bcfg;
  tts::Backbone backbone(bcfg, options.seed);
  sign::SignBranchConfig scfg;
  sign::SignBranch branch(scfg, options.seed);
  nn::ParamList branch_params = branch.params();
  perturb(branch_params, "adapm.residual", rng);
  perturb(branch_params, "adapm.gate", rng);
  perturb(branch_params, "visual.adjacency_delta", rng);

  const corpus::KeypointSequence clip = short_clip(options.seed);
  {
    nn::ParamList vp;
    branch.visual.collect(vp);
    const Matrix r = random_matrix((clip.length() + 3) / 4, bcfg.width, 1.0, rng);
    out.push_back(check_params("visual_backbone", vp, [&](nn::Binder& b) {
      return weighted_sum(branch.visual(b, clip).values, r);
    }, options));
  }

  const corpus::PhonemeSequence text = short_text(rng, 8, bcfg.vocab_size);
  {
    nn::Binder none;
    const tts::PhonemeLatents latents = backbone.encode(none, text, 0);
    const tts::VarianceOutput phoneme = backbone.predict_variance(none, latents);
    const sign::SignFeatures features = branch.visual(none, clip);
    nn::ParamList ap;
    branch.adapm.collect(ap);
    const Matrix r = random_matrix(8, 3, 1.0, rng);
    out.push_back(check_params("adapm", ap, [&](nn::Binder& b) {
      const auto o = branch.adapm(b, latents, phoneme, features);
      const std::array<Var, 3> cols = {o.mixed.pitch, o.mixed.energy, o.mixed.log_duration};
      return weighted_sum(ag::concat_cols(cols), r) + o.w_sign;
    }, options));
  }

  {
    sign_prosody::SignProsodyLabel label = sign_prosody::prosody_label(clip, scfg.bins);
    nn::ParamList ep;
    branch.estimator.collect(ep);
    const Matrix pitch = random_unit(8, 1, 0.1, 0.9, rng);
    const Matrix energy = random_unit(8, 1, 0.1, 0.9, rng);
    out.push_back(check_params("estimator", ep, [&](nn::Binder& b) {
      return losses::signrec_loss(
          label, branch.estimator(b, ag::constant(pitch), ag::constant(energy)));
    }, options));
    out.push_back(check_inputs("estimator[contours]", {pitch, energy},
                               [&](const std::vector<Var>& v) {
                                 nn::Binder none;
                                 return losses::signrec_loss(label,
                                                             branch.estimator(none, v[0], v[1]));
                               }, options));
  }

  {
    const Index frames = 40;
    const Matrix x = random_matrix(frames, bcfg.width, 1.0, rng);
    const Matrix r = random_matrix(frames, bcfg.mel_bins, 1.0, rng);
    out.push_back(check_params("decoder", backbone.decoder_params(), [&](nn::Binder& b) {
      return weighted_sum(backbone.decode(b, ag::constant(x)), r);
    }, options));

    nn::Binder none;
    const tts::PhonemeLatents latents = backbone.encode(none, text, 1);
    const std::vector<int> durations = {3, 5, 4, 6, 2, 7, 5, 4};
    const Matrix rm = random_matrix(36, bcfg.mel_bins, 1.0, rng);
    out.push_back(check_inputs(
        "length_regulate+decode[contours]",
        {random_unit(8, 1, 0.05, 0.95, rng), random_unit(8, 1, 0.05, 0.95, rng)},
        [&](const std::vector<Var>& v) {
          nn::Binder b;
          return weighted_sum(
              backbone.decode(b, backbone.length_regulate(b, latents, v[0], v[1], durations)),
              rm);
        }, options));
  }
  return out;
}

std::string format_results(const std::vector<Result>& results) {
  std::ostringstream os;
  os << std::left << std::setw(40) << "check" << std::setw(9) << "entries"
     << std::setw(14) << "max_rel_err" << "status\n";
  for (const auto& r : results) {
    os << std::setw(40) << r.name << std::setw(9) << r.entries << std::setw(14)
       << std::scientific << std::setprecision(3) << r.max_rel_error
       << std::defaultfloat << (r.passed ? "PASS" : "FAIL") << "\n";
  }
  return os.str();
}

}  // namespace s2p::gradcheck
