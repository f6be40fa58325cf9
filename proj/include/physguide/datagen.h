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

#ifndef PHYSGUIDE_DATAGEN_H_
#define PHYSGUIDE_DATAGEN_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>

#include "json.hpp"
#include "physguide/character.h"
#include "physguide/motion_io.h"

namespace physguide {

// Parameters of one synthetic gait. The meaning of the amplitude fields
// depends on the kind:
//   stand: hip_amp = torso sway (rad), knee_amp = knee bend (rad),
//          bob_amp = extra knee bend oscillation (rad)
//   walk:  stride = step length (m), hip_amp = forward torso lean (rad),
//          bob_amp = swing foot clearance (m)
//   hop:   knee_amp = squat depth (rad), bob_amp = heel raise (m)
struct GaitParams {
  Condition kind = Condition::kStand;
  double frequency = 1.0;  // Hz
  double stride = 0.0;     // m, walk step length
  double hip_amp = 0.0;
  double knee_amp = 0.0;
  double bob_amp = 0.0;
  double phase = 0.0;  // rad

  // Artifact injection, all zero for clean data.
  double float_mm = 0.0;
  double slide_mm = 0.0;  // per frame, cumulative along x
  double penetration_mm = 0.0;

  void Validate() const;
  nlohmann::json ToJson() const;
};

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct GaitRanges {
  ParamRange frequency;
  ParamRange stride;
  ParamRange hip_amp;
  ParamRange knee_amp;
  ParamRange bob_amp;
};

std::array<GaitRanges, kNumClasses> DefaultGaitRanges();

struct DatasetSpec {
  std::array<int, kNumClasses> counts = {300, 300, 300};
  std::array<GaitRanges, kNumClasses> ranges = DefaultGaitRanges();
  int horizon = 60;
  double fps = 30.0;
  uint64_t seed = 0;

  void Validate() const;
  nlohmann::json RangesToJson() const;
};

GaitParams SampleGaitParams(Condition kind, const GaitRanges& ranges,
                            std::mt19937_64& rng);

// Periodic joint trajectories with the root placed so the lowest point
// touches the ground and the lowest contact point does not slide between
// frames. Throws std::invalid_argument when a joint leaves its limits.
Motion GenerateGait(const GaitParams& params, int horizon,
                    const CharacterModel& character, double fps = 30.0);

// Per-item seed derived from the dataset seed and the item index.
uint64_t ItemSeed(uint64_t seed, uint64_t index);

// Writes motion files and the manifest into `dir` and returns the dataset.
MotionDataset BuildDataset(const std::filesystem::path& dir,
                           const DatasetSpec& spec);

// Same motions as BuildDataset without touching the disk.
std::vector<Motion> GenerateMotions(const DatasetSpec& spec);

}  // namespace physguide

#endif  // PHYSGUIDE_DATAGEN_H_
