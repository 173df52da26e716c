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

// Central-difference gradient checks for graph-built scalar functions.

#ifndef S2P_GRADCHECK_H_
#define S2P_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "s2p/nn.h"

namespace s2p::gradcheck {

using ag::Matrix;
using ag::Var;

struct Options {
  // Central-difference step. Smaller steps let roundoff swamp gradients that
  // are exactly zero (attention key biases).
  double eps = 1e-5;
  // Entries sampled per tensor; tensors this small or smaller are checked
  // exhaustively.
  int entries_per_tensor = 16;
  // Denominator floor so near-zero gradients are compared absolutely.
  double floor = 1e-4;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

struct Result {
  std::string name;
  double max_rel_error = 0.0;
  int entries = 0;
  bool passed = true;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor)
double relative_error(double analytic, double numeric, double floor);

// Checks d f / d p for every listed parameter; f must build a fresh graph
// from the given binder on each call.
Result check_params(const std::string& name, const nn::ParamList& params,
                    const std::function<Var(nn::Binder&)>& f, const Options& options = {});

// Checks d f / d inputs for plain matrices turned into leaves.
Result check_inputs(const std::string& name, std::vector<Matrix> inputs,
                    const std::function<Var(const std::vector<Var>&)>& f,
                    const Options& options = {});

// The full suite: every loss (including both sides of each hinge), the
// visual backbone, AdaPM, the estimator and the decoder.
std::vector<Result> run_suite(const Options& options = {});

std::string format_results(const std::vector<Result>& results);

}  // namespace s2p::gradcheck

#endif  // S2P_GRADCHECK_H_
