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

#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "physguide/datagen.h"
#include "physguide/metrics.h"
#include "physguide/motion_io.h"

namespace physguide {
namespace {

namespace fs = std::filesystem;

std::string ReadBytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

GaitParams MidParams(Condition kind) {
  const GaitRanges r = DefaultGaitRanges()[static_cast<int>(kind)];
  auto mid = [](const ParamRange& p) { return 0.5 * (p.lo + p.hi); };
  GaitParams g;
  g.kind = kind;
  g.frequency = mid(r.frequency);
  g.stride = mid(r.stride);
  g.hip_amp = mid(r.hip_amp);
  g.knee_amp = mid(r.knee_amp);
  g.bob_amp = mid(r.bob_amp);
  return g;
}

TEST(DatagenTest, BuildsBalancedReproducibleDataset) {
  DatasetSpec spec;
  spec.counts = {10, 10, 10};
  spec.seed = 21;
  const fs::path a = fs::temp_directory_path() / "pg_datagen_a";
  const fs::path b = fs::temp_directory_path() / "pg_datagen_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const MotionDataset ds = BuildDataset(a, spec);
  BuildDataset(b, spec);

  int files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string name = entry.path().filename().string();
    if (name == kManifestName) continue;
    ++files;
    EXPECT_EQ(ReadBytes(entry.path()), ReadBytes(b / name)) << name;
  }
  EXPECT_EQ(files, 30);
  EXPECT_EQ(ReadBytes(a / kManifestName), ReadBytes(b / kManifestName));

  const MotionDataset loaded = LoadDataset(a);
  std::array<int, kNumClasses> counts{};
  for (size_t i = 0; i < loaded.motions.size(); ++i) {
    ++counts[static_cast<int>(loaded.motions[i].condition)];
    EXPECT_EQ(loaded.motions[i].frames, ds.motions[i].frames);
    EXPECT_EQ(loaded.motions[i].condition, ds.motions[i].condition);
  }
  EXPECT_EQ(counts, (std::array<int, kNumClasses>{10, 10, 10}));
  EXPECT_EQ(loaded.manifest.class_counts, spec.counts);

  // In-memory generation matches the files.
  const auto mem = GenerateMotions(spec);
  ASSERT_EQ(mem.size(), ds.motions.size());
  for (size_t i = 0; i < mem.size(); ++i) EXPECT_EQ(mem[i].frames, ds.motions[i].frames);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(DatagenTest, DifferentSeedsDiffer) {
  DatasetSpec spec;
  spec.counts = {2, 2, 2};
  spec.seed = 1;
  const auto x = GenerateMotions(spec);
  spec.seed = 2;
  const auto y = GenerateMotions(spec);
  EXPECT_NE(x[0].frames, y[0].frames);
  EXPECT_NE(ItemSeed(1, 0), ItemSeed(1, 1));
}

TEST(DatagenTest, CleanGaitsArePlausible) {
  const CharacterModel character = CharacterModel::Default();
  EXPECT_LT(ComputePhysMetrics(GenerateGait(MidParams(Condition::kStand), 60,
                                            character))
                .phys_err,
            1.0);
  EXPECT_LT(
      ComputePhysMetrics(GenerateGait(MidParams(Condition::kWalk), 60, character))
          .skate,
      2.0);
  const Motion hop = GenerateGait(MidParams(Condition::kHop), 60, character);
  EXPECT_EQ(hop.condition, Condition::kHop);
  EXPECT_EQ(hop.length(), 60);
}

TEST(DatagenTest, FloatOffsetArithmetic) {
  const CharacterModel character = CharacterModel::Default();
  for (Condition kind : {Condition::kStand, Condition::kWalk, Condition::kHop}) {
    GaitParams p = MidParams(kind);
    p.float_mm = 20.0;
    const PhysMetrics m = ComputePhysMetrics(GenerateGait(p, 60, character));
    EXPECT_NEAR(m.float_mm, 15.0, 0.5) << ConditionName(kind);
  }
}

TEST(DatagenTest, ArtifactKnobsAreMonotone) {
  const CharacterModel character = CharacterModel::Default();
  for (Condition kind : {Condition::kStand, Condition::kWalk, Condition::kHop}) {
    double last_float = -1.0, last_skate = -1.0, last_pen = -1.0;
    for (double amount = 0.0; amount <= 30.0; amount += 3.0) {
      GaitParams f = MidParams(kind), s = MidParams(kind), d = MidParams(kind);
      f.float_mm = amount;
      s.slide_mm = amount / 3.0;
      d.penetration_mm = amount;
      const double fl = ComputePhysMetrics(GenerateGait(f, 60, character)).float_mm;
      const double sk = ComputePhysMetrics(GenerateGait(s, 60, character)).skate;
      const double pe = ComputePhysMetrics(GenerateGait(d, 60, character)).penetrate;
      EXPECT_GE(fl, last_float);
      EXPECT_GE(sk, last_skate);
      EXPECT_GE(pe, last_pen);
      last_float = fl;
      last_skate = sk;
      last_pen = pe;
    }
    EXPECT_GT(last_float, 20.0);
    EXPECT_GT(last_skate, 5.0);
    EXPECT_GT(last_pen, 20.0);
  }
}

TEST(DatagenTest, DefaultDatasetStatistics) {
  const auto motions = GenerateMotions(DatasetSpec{});
  ASSERT_EQ(motions.size(), 900u);
  double phys = 0.0;
  std::array<double, kPoseDim> sum{}, sq{};
  long count = 0;
  for (const Motion& m : motions) {
    phys += ComputePhysMetrics(m).phys_err / motions.size();
    for (int h = 1; h < m.length(); ++h) {
      PoseVector v = m.frames[h].ToVector();
      v[0] -= m.frames[h - 1].x;  // root x as a per-frame delta
      for (int k = 0; k < kPoseDim; ++k) {
        sum[k] += v[k];
        sq[k] += v[k] * v[k];
      }
      ++count;
    }
  }
  EXPECT_LT(phys, 3.0);
  for (int k = 0; k < kPoseDim; ++k) {
    const double mean = sum[k] / count;
    const double sd = std::sqrt(std::max(0.0, sq[k] / count - mean * mean));
    EXPECT_TRUE(std::isfinite(sd));
    EXPECT_GT(sd, 0.0) << "dim " << k;
  }
}

TEST(DatagenTest, InvalidParamsRejected) {
  GaitParams p = MidParams(Condition::kWalk);
  p.frequency = 0.0;
  EXPECT_THROW(p.Validate(), std::invalid_argument);
  GaitParams wide = MidParams(Condition::kHop);
  wide.knee_amp = 3.0;
  EXPECT_THROW(GenerateGait(wide, 60, CharacterModel::Default()),
               std::invalid_argument);
  DatasetSpec spec;
  spec.counts = {0, 1, 1};
  EXPECT_THROW(spec.Validate(), std::invalid_argument);
}

}  // namespace
}  // namespace physguide
