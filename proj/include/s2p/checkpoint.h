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

// Single-file tensor container: "SRG1", u32 header length, JSON header,
// then named float32 little-endian tensors with (rows, cols) prefixes.

#ifndef S2P_CHECKPOINT_H_
#define S2P_CHECKPOINT_H_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace s2p {

inline constexpr char kCheckpointMagic[] = "SRG1";

struct TensorFile {
  nlohmann::json header;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

  // Throws ParseError when absent.
  const Eigen::MatrixXd& get(const std::string& name) const;
  const Eigen::MatrixXd* find(const std::string& name) const;
};

// Written to a sibling temp file and renamed into place.
void write_tensor_file(const TensorFile& file, const std::filesystem::path& path);
TensorFile read_tensor_file(const std::filesystem::path& path);

}  // namespace s2p

#endif  // S2P_CHECKPOINT_H_
