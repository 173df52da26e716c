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

#include "s2p/checkpoint.h"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "s2p/errors.h"

namespace s2p {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw ParseError("checkpoint truncated while reading " + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

const Eigen::MatrixXd* TensorFile::find(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return &m;
  }
  return nullptr;
}

const Eigen::MatrixXd& TensorFile::get(const std::string& name) const {
  const auto* m = find(name);
  if (m == nullptr) throw ParseError("checkpoint is missing tensor '" + name + "'");
  return *m;
}

void write_tensor_file(const TensorFile& file, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    os.write(kCheckpointMagic, 4);
    const std::string header = file.header.dump();
    put_u32(os, static_cast<std::uint32_t>(header.size()));
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    put_u32(os, static_cast<std::uint32_t>(file.tensors.size()));
    for (const auto& [name, m] : file.tensors) {
      put_u32(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u32(os, static_cast<std::uint32_t>(m.rows()));
      put_u32(os, static_cast<std::uint32_t>(m.cols()));
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          const float f = static_cast<float>(m(r, c));
          std::uint32_t bits;
          std::memcpy(&bits, &f, 4);
          put_u32(os, bits);
        }
      }
    }
    if (!os) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw ParseError(path.string() + ": not an SRG1 checkpoint");
  }
  TensorFile file;
  const std::uint32_t header_len = get_u32(is, "header length");
  std::string header(header_len, '\0');
  if (!is.read(header.data(), header_len)) {
    throw ParseError(path.string() + ": truncated header");
  }
  try {
    file.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad header: " + e.what());
  }
  const std::uint32_t count = get_u32(is, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(is, "tensor name");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw ParseError("checkpoint truncated in tensor name");
    const std::uint32_t rows = get_u32(is, name);
    const std::uint32_t cols = get_u32(is, name);
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        const std::uint32_t bits = get_u32(is, name);
        float f;
        std::memcpy(&f, &bits, 4);
        m(r, c) = static_cast<double>(f);
      }
    }
    file.tensors.emplace_back(std::move(name), std::move(m));
  }
  return file;
}

}  // namespace s2p
