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

#ifndef S2P_ERRORS_H_
#define S2P_ERRORS_H_

#include <stdexcept>
#include <string>

namespace s2p {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Input data that cannot be processed (static clips, zero-width shoulders).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Too few samples or zero spread for a statistic.
class StatisticsError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses, missing inputs, checkpoint mismatches.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace s2p

#endif  // S2P_ERRORS_H_
