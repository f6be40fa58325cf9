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

#ifndef PHYSGUIDE_EXPERIMENT_H_
#define PHYSGUIDE_EXPERIMENT_H_

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "physguide/character.h"
#include "physguide/datagen.h"
#include "physguide/denoiser.h"
#include "physguide/diffusion.h"
#include "physguide/imitation.h"
#include "physguide/metrics.h"
#include "physguide/sim.h"

namespace physguide {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputEnvVar = "PHYSGUIDE_OUT";
inline constexpr const char* kRunManifestName = "run_manifest.json";

// Thrown for invalid configuration values; the message names the field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Everything a CLI subcommand needs. `seed` overrides the seed fields of
// the nested configs (see ApplySeed).
struct RunConfig {
  std::string dataset = "data";
  std::string denoiser = "checkpoints/denoiser";
  std::string policy = "checkpoints/policy";
  std::string classifier = "checkpoints/classifier";
  std::string output;  // empty: $PHYSGUIDE_OUT, else "runs"
  uint64_t seed = 0;

  DatasetSpec datagen;
  DenoiserTrainConfig denoiser_train;
  PpoConfig ppo;
  RewardWeights reward;
  ClassifierTrainConfig classifier_train;

  SamplerConfig sampler;
  std::string schedule = "end:4:1";
  SimConfig sim;
  ProjectionConfig projection;

  int num_seeds = 3;
  int max_postproc_steps = 4;
  std::vector<std::string> variants = {"uniform:4",   "startend:3:1",
                                       "startend:2:2", "end:4:3",
                                       "end:4:2",      "end:4:1"};
  // Empty: {0, 1, 4, 12, T}.
  std::vector<int> projection_counts;

  void ApplySeed();
  // Throws ConfigError with a field-qualified message.
  void Validate() const;
  std::filesystem::path OutputRoot() const;
  std::vector<int> ProjectionCounts() const;

  nlohmann::json ToJson() const;
  // Starts from the defaults; unknown keys are rejected.
  static RunConfig FromJson(const nlohmann::json& j);
  static RunConfig Load(const std::filesystem::path& path);
};

nlohmann::json SimConfigToJson(const SimConfig& c);
SimConfig SimConfigFromJson(const nlohmann::json& j, SimConfig base = {});

// Metrics of one set of motions. `fid` and `accuracy` are NaN when no
// reference statistics or classifier were supplied.
struct MotionSetReport {
  std::vector<PhysMetrics> rows;
  PhysMetrics mean;
  PhysMetrics stddev;
  double fid = 0.0;
  double accuracy = 0.0;

  nlohmann::json ToJson() const;
  std::string RowsCsv() const;
};

MotionSetReport EvaluateMotionSet(const std::vector<Motion>& motions,
                                  const FeatureStats* reference,
                                  const MotionClassifier* classifier);

FeatureStats ReferenceStats(const std::vector<Motion>& motions);

// Conditions cycling stand, walk, hop.
std::vector<Condition> BalancedConditions(int n);

// Small aligned-text / CSV table.
class Table {
 public:
  explicit Table(std::vector<std::string> header);
  void AddRow(std::vector<std::string> row);
  std::string ToCsv() const;
  std::string ToText() const;
  size_t size() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string FormatDouble(double v, int precision = 4);

struct ExperimentModels {
  const MotionDenoiser* denoiser = nullptr;
  const ImitationPolicy* policy = nullptr;
  const MotionClassifier* classifier = nullptr;  // optional
  FeatureStats reference;
};

// Seed of evaluation repeat r; chains inside a batch use seed + i.
uint64_t RepeatSeed(uint64_t base, int r);

std::vector<Motion> SampleBatch(const ExperimentModels& models,
                                const RunConfig& config,
                                const ProjectionSchedule& schedule,
                                uint64_t seed);

// Applies `steps` successive projections; throws ProjectionFailedError
// (step = pass index) if a projection fails.
std::vector<Motion> PostProcess(const std::vector<Motion>& motions,
                                const ImitationPolicy& policy,
                                const SimConfig& sim,
                                const ProjectionConfig& projection, int steps);

struct ExperimentRow {
  std::string group;    // "schedule", "count", "postproc" or "inloop"
  std::string variant;  // schedule string or method name
  int count = 0;        // projections (count / postproc rows)
  int seed = -1;        // repeat index, -1 for the seed mean
  PhysMetrics metrics;
  double fid = 0.0;
  double accuracy = 0.0;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
  bool complete = true;
  std::string error;
  // Post-processing only: k = 1 post-processing equals schedule {0}.
  bool k1_identity = false;

  // Seed-mean row, or nullptr.
  const ExperimentRow* Mean(const std::string& group,
                            const std::string& variant, int count) const;
  const ExperimentRow* Find(const std::string& group,
                            const std::string& variant, int count,
                            int seed) const;
  Table ToTable() const;
  nlohmann::json ToJson() const;
};

using RowCallback = std::function<void(const ExperimentRow&)>;

// Table-4 style variants plus the projection-count curve (End-N-Space-1).
// A failing variant stops the sweep; finished rows are kept.
ExperimentReport RunScheduleSweep(const ExperimentModels& models,
                                  const RunConfig& config,
                                  const RowCallback& on_row = {});

// k = 0..max_postproc_steps post-processing passes on pure DDIM samples
// versus k in-loop projections at the end of sampling.
ExperimentReport RunPostprocComparison(const ExperimentModels& models,
                                       const RunConfig& config,
                                       const RowCallback& on_row = {});

// run_manifest.json: command, config echo, seed, version, wall time.
void WriteRunManifest(const std::filesystem::path& dir,
                      const std::string& command, const RunConfig& config,
                      double wall_seconds,
                      const nlohmann::json& extra = nlohmann::json::object());

std::vector<Motion> ReadMotionDir(const std::filesystem::path& dir);
void WriteMotionDir(const std::filesystem::path& dir,
                    const std::vector<Motion>& motions,
                    const std::string& prefix = "motion");

}  // namespace physguide

#endif  // PHYSGUIDE_EXPERIMENT_H_
