// Copyright 2026 The physguide Authors
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

#include "physguide/nn.h"

#include <bit>
#include <cstring>
#include <fstream>

namespace physguide {

std::string ActivationName(Activation a) {
  return a == Activation::kTanh ? "tanh" : "silu";
}

Activation ParseActivation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "silu") return Activation::kSilu;
  throw std::invalid_argument("unknown activation: " + name);
}

void WriteFloatBinary(const std::filesystem::path& path,
                      const std::vector<float>& values) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (float v : values) {
    uint32_t bits = std::bit_cast<uint32_t>(v);
    unsigned char bytes[4] = {
        static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
        static_cast<unsigned char>(bits >> 16),
        static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<float> ReadFloatBinary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  if (raw.size() % 4 != 0) {
    throw std::invalid_argument(path.string() + ": size not a multiple of 4");
  }
  std::vector<float> values(raw.size() / 4);
  for (size_t i = 0; i < values.size(); ++i) {
    const auto* b = reinterpret_cast<const unsigned char*>(&raw[4 * i]);
    const uint32_t bits = uint32_t(b[0]) | uint32_t(b[1]) << 8 |
                          uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

}  // namespace physguide
