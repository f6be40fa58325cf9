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

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "physguide/datagen.h"
#include "physguide/experiment.h"
#include "test_util.h"

namespace physguide {
namespace {

namespace fs = std::filesystem;

std::string ErrorOf(const RunConfig& c) {
  try {
    c.Validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(RunConfigTest, JsonRoundTrip) {
  RunConfig c;
  c.seed = 77;
  c.schedule = "uniform:4";
  c.sampler.T = 20;
  c.sim.friction = 0.7;
  c.ppo.hidden = {32, 32};
  c.projection_counts = {0, 2, 20};
  c.ApplySeed();
  const RunConfig back = RunConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
  EXPECT_EQ(back.ppo.seed, 77u);
  EXPECT_EQ(back.sim.friction, 0.7);
  EXPECT_EQ(back.ProjectionCounts(), (std::vector<int>{0, 2, 20}));
}

TEST(RunConfigTest, PartialDocumentKeepsDefaults) {
  const RunConfig c = RunConfig::FromJson({{"schedule", "end:4:3"}, {"seed", 5}});
  EXPECT_EQ(c.schedule, "end:4:3");
  EXPECT_EQ(c.sampler.T, 50);
  EXPECT_EQ(c.sampler.seed, 5u);
  EXPECT_EQ(c.ProjectionCounts(), (std::vector<int>{0, 1, 4, 12, 50}));
}

TEST(RunConfigTest, UnknownKeysRejected) {
  EXPECT_THROW(RunConfig::FromJson({{"shedule", "none"}}), ConfigError);
  EXPECT_THROW(RunConfig::FromJson({{"sampler", {{"etaa", 0.5}}}}), ConfigError);
}

TEST(RunConfigTest, ValidationNamesTheField) {
  RunConfig c;
  EXPECT_EQ(ErrorOf(c), "");
  c.sampler.eta = 2.0;
  EXPECT_NE(ErrorOf(c).find("sampler"), std::string::npos);
  c = RunConfig();
  c.schedule = "end:40:3";
  EXPECT_NE(ErrorOf(c).find("schedule"), std::string::npos);
  c = RunConfig();
  c.variants = {"none", "bogus"};
  EXPECT_NE(ErrorOf(c).find("variants[1]"), std::string::npos);
  c = RunConfig();
  c.num_seeds = 0;
  EXPECT_NE(ErrorOf(c).find("num_seeds"), std::string::npos);
  c = RunConfig();
  c.sim.control_hz = 7.0;
  EXPECT_NE(ErrorOf(c).find("sim"), std::string::npos);
}

TEST(RunConfigTest, LoadFromFile) {
  const fs::path path = fs::temp_directory_path() / "pg_run_config.json";
  std::ofstream(path) << R"({"num_seeds": 2, "sampler": {"T": 10}})";
  const RunConfig c = RunConfig::Load(path);
  EXPECT_EQ(c.num_seeds, 2);
  EXPECT_EQ(c.sampler.T, 10);
  std::ofstream(path) << "{ broken";
  EXPECT_THROW(RunConfig::Load(path), ConfigError);
  fs::remove(path);
  EXPECT_THROW(RunConfig::Load(path), ConfigError);
}

TEST(RunConfigTest, OutputRootFallbacks) {
  RunConfig c;
  c.output = "explicit";
  EXPECT_EQ(c.OutputRoot(), fs::path("explicit"));
  c.output.clear();
  setenv(kOutputEnvVar, "/tmp/from_env", 1);
  EXPECT_EQ(c.OutputRoot(), fs::path("/tmp/from_env"));
  unsetenv(kOutputEnvVar);
  EXPECT_EQ(c.OutputRoot(), fs::path("runs"));
}

TEST(TableTest, CsvAndText) {
  Table t({"name", "value"});
  t.AddRow({"a", "1.5"});
  t.AddRow({"long name", "2"});
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.ToCsv(), "name,value\na,1.5\nlong name,2\n");
  const std::string text = t.ToText();
  EXPECT_NE(text.find("long name"), std::string::npos);
  EXPECT_THROW(t.AddRow({"only one"}), std::invalid_argument);
  EXPECT_EQ(FormatDouble(1.23456, 2), "1.23");
}

TEST(ExperimentUtilTest, SeedsAndConditions) {
  EXPECT_EQ(RepeatSeed(10, 0), 10u);
  EXPECT_NE(RepeatSeed(10, 1), RepeatSeed(10, 2));
  EXPECT_GT(RepeatSeed(0, 1), 64u);  // chains of one repeat never collide
  const auto c = BalancedConditions(5);
  EXPECT_EQ(c, (std::vector<Condition>{Condition::kStand, Condition::kWalk,
                                       Condition::kHop, Condition::kStand,
                                       Condition::kWalk}));
}

TEST(ExperimentUtilTest, MotionDirRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "pg_motion_dir";
  fs::remove_all(dir);
  std::vector<Motion> motions = {testing::ConstantMotion(4), testing::ConstantMotion(5, 0.1)};
  motions[1].condition = Condition::kHop;
  WriteMotionDir(dir, motions, "sample");
  EXPECT_TRUE(fs::exists(dir / "sample_00001.json"));
  const auto back = ReadMotionDir(dir);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].frames, motions[1].frames);
  EXPECT_EQ(back[1].condition, Condition::kHop);
  fs::remove_all(dir);
  EXPECT_THROW(ReadMotionDir(dir), std::runtime_error);
}

TEST(EvaluateMotionSetTest, AggregatesRows) {
  const std::vector<Motion> motions = {testing::ConstantMotion(6, -0.012),
                                       testing::ConstantMotion(6, 0.020)};
  const MotionSetReport r = EvaluateMotionSet(motions, nullptr, nullptr);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_NEAR(r.mean.penetrate, 3.5, 1e-9);
  EXPECT_NEAR(r.mean.float_mm, 7.5, 1e-9);
  EXPECT_NEAR(r.mean.phys_err, 11.0, 1e-9);
  EXPECT_TRUE(std::isnan(r.fid));
  EXPECT_TRUE(std::isnan(r.accuracy));
  const std::string csv = r.RowsCsv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const FeatureStats ref = ReferenceStats(motions);
  EXPECT_NEAR(EvaluateMotionSet(motions, &ref, nullptr).fid, 0.0, 1e-9);
}

// Tiny models exercise the experiment plumbing end to end.
class TinyExperimentTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    DatasetSpec spec;
    spec.counts = {4, 4, 4};
    motions_ = new std::vector<Motion>(GenerateMotions(spec));
    DenoiserTrainConfig dcfg;
    dcfg.hidden = {16};
    dcfg.epochs = 2;
    dcfg.batch_size = 4;
    denoiser_ = new MotionDenoiser(TrainDenoiser(*motions_, dcfg).model);
    policy_ = new ImitationPolicy({16}, 2);
  }
  static void TearDownTestSuite() {
    delete motions_;
    delete denoiser_;
    delete policy_;
  }

  static RunConfig Config() {
    RunConfig c;
    c.sampler.T = 6;
    c.sampler.batch = 3;
    c.num_seeds = 2;
    c.max_postproc_steps = 2;
    c.variants = {"uniform:2", "end:2:1"};
    return c;
  }
  static ExperimentModels Models() {
    ExperimentModels m;
    m.denoiser = denoiser_;
    m.policy = policy_;
    m.reference = ReferenceStats(*motions_);
    return m;
  }

  static std::vector<Motion>* motions_;
  static MotionDenoiser* denoiser_;
  static ImitationPolicy* policy_;
};

std::vector<Motion>* TinyExperimentTest::motions_ = nullptr;
MotionDenoiser* TinyExperimentTest::denoiser_ = nullptr;
ImitationPolicy* TinyExperimentTest::policy_ = nullptr;

TEST_F(TinyExperimentTest, PostprocComparisonIdentity) {
  const ExperimentReport r = RunPostprocComparison(Models(), Config());
  ASSERT_TRUE(r.complete) << r.error;
  EXPECT_TRUE(r.k1_identity);
  for (int k = 0; k <= 2; ++k) {
    ASSERT_NE(r.Mean("postproc", "post-processing", k), nullptr) << k;
    for (int s = 0; s < 2; ++s) {
      EXPECT_NE(r.Find("postproc", "post-processing", k, s), nullptr);
    }
  }
  const ExperimentRow* k1 = r.Find("postproc", "post-processing", 1, 0);
  ASSERT_NE(k1, nullptr);
  EXPECT_TRUE(std::isfinite(k1->fid));
  EXPECT_TRUE(r.ToJson().at("k1_identity").get<bool>());
  EXPECT_GT(r.ToTable().size(), 0u);
}

TEST_F(TinyExperimentTest, ScheduleSweepRowsAndDeterminism) {
  int callbacks = 0;
  const ExperimentReport a =
      RunScheduleSweep(Models(), Config(), [&](const ExperimentRow&) { ++callbacks; });
  ASSERT_TRUE(a.complete) << a.error;
  EXPECT_EQ(callbacks, static_cast<int>(a.rows.size()));
  for (const char* v : {"uniform:2", "end:2:1"}) {
    EXPECT_NE(a.Mean("schedule", v, 2), nullptr) << v;
  }
  for (int count : Config().ProjectionCounts()) {
    const std::string variant =
        count == 0 ? "none" : "end:" + std::to_string(count) + ":1";
    EXPECT_NE(a.Mean("count", variant, count), nullptr) << count;
  }
  const ExperimentReport b = RunScheduleSweep(Models(), Config());
  EXPECT_EQ(a.ToJson(), b.ToJson());
}

TEST_F(TinyExperimentTest, SampleBatchShapes) {
  const auto out = SampleBatch(Models(), Config(), ProjectionSchedule::Parse("end:1:1"), 4);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].condition, Condition::kStand);
  EXPECT_EQ(out[2].condition, Condition::kHop);
  EXPECT_EQ(out[0].length(), 60);
}

}  // namespace
}  // namespace physguide
