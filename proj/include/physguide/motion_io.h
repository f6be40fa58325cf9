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

#ifndef PHYSGUIDE_MOTION_IO_H_
#define PHYSGUIDE_MOTION_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "physguide/character.h"

namespace physguide {

inline constexpr int kMotionFormatVersion = 1;

// Motion documents are JSON:
//   {format_version, fps, character, condition, frames: [[9 numbers], ...]}
// Numbers use the shortest representation that round-trips a double.
nlohmann::json CharacterToJson(const CharacterModel& character);
CharacterModel CharacterFromJson(const nlohmann::json& j);
nlohmann::json MotionToJson(const Motion& motion);
Motion MotionFromJson(const nlohmann::json& j);

// Throws std::runtime_error on I/O failure and std::invalid_argument on a
// malformed document.
void WriteMotion(const std::filesystem::path& path, const Motion& motion);
Motion ReadMotion(const std::filesystem::path& path);

struct DatasetEntry {
  std::string file;  // relative to the dataset directory
  Condition label = Condition::kNull;
  uint64_t seed = 0;
};

struct DatasetManifest {
  int format_version = kMotionFormatVersion;
  uint64_t seed = 0;
  std::array<int, kNumClasses> class_counts{};
  nlohmann::json param_ranges = nlohmann::json::object();
  std::vector<DatasetEntry> entries;
};

inline constexpr const char* kManifestName = "manifest.json";

void WriteManifest(const std::filesystem::path& dir,
                   const DatasetManifest& manifest);
DatasetManifest ReadManifest(const std::filesystem::path& dir);

struct MotionDataset {
  DatasetManifest manifest;
  std::vector<Motion> motions;
};

// Loads every motion listed in the manifest; labels come from the manifest.
MotionDataset LoadDataset(const std::filesystem::path& dir);

// Writes a JSON document with a trailing newline, replacing the file.
void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json ReadJsonFile(const std::filesystem::path& path);

}  // namespace physguide

#endif  // PHYSGUIDE_MOTION_IO_H_
