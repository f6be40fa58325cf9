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

// Command-line entry point: dataset generation, training, sampling,
// projection, evaluation and the schedule / post-processing experiments.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "physguide/datagen.h"
#include "physguide/denoiser.h"
#include "physguide/diffusion.h"
#include "physguide/experiment.h"
#include "physguide/imitation.h"
#include "physguide/metrics.h"
#include "physguide/motion_io.h"

namespace physguide {
namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// A missing input file or directory; reported as a validation error.
class MissingInputError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Flag values; unset flags leave the config file (or default) alone.
struct Overrides {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> dataset, denoiser, policy, classifier, output;
  std::optional<std::string> schedule;
  std::optional<int> T, batch, num_seeds, max_steps, epochs;
  std::optional<double> eta, guidance_w;
  std::optional<std::vector<int>> counts;
  std::optional<std::vector<std::string>> variants;
  std::optional<std::vector<int>> projection_counts;
  bool stochastic = false;
  // Command specific.
  std::string input;
  int steps = 1;
};

void AddCommonFlags(CLI::App* app, Overrides* o) {
  app->add_option("--config", o->config_path, "JSON run configuration");
  app->add_option("--seed", o->seed, "Global seed (overrides nested seeds)");
  app->add_option("--dataset", o->dataset, "Dataset directory");
  app->add_option("--denoiser", o->denoiser, "Denoiser checkpoint directory");
  app->add_option("--policy", o->policy, "Policy checkpoint directory");
  app->add_option("--classifier", o->classifier,
                  "Classifier checkpoint directory");
  app->add_option("--out", o->output,
                  std::string("Output root (default $") + kOutputEnvVar +
                      " or ./runs)");
}

void AddSamplerFlags(CLI::App* app, Overrides* o) {
  app->add_option("--T", o->T, "Number of diffusion steps");
  app->add_option("--eta", o->eta, "DDIM stochasticity in [0, 1]");
  app->add_option("--guidance", o->guidance_w, "Classifier-free guidance w");
  app->add_option("--batch", o->batch, "Motions per sample batch");
  app->add_flag("--stochastic", o->stochastic,
                "Sample policy actions during projection");
}

RunConfig BuildConfig(const Overrides& o) {
  RunConfig c;
  if (!o.config_path.empty()) {
    if (!fs::exists(o.config_path)) {
      throw MissingInputError("config file not found: " + o.config_path);
    }
    c = RunConfig::Load(o.config_path);
  }
  if (o.seed) c.seed = *o.seed;
  if (o.dataset) c.dataset = *o.dataset;
  if (o.denoiser) c.denoiser = *o.denoiser;
  if (o.policy) c.policy = *o.policy;
  if (o.classifier) c.classifier = *o.classifier;
  if (o.output) c.output = *o.output;
  if (o.schedule) c.schedule = *o.schedule;
  if (o.T) c.sampler.T = *o.T;
  if (o.eta) c.sampler.eta = *o.eta;
  if (o.guidance_w) c.sampler.guidance_w = *o.guidance_w;
  if (o.batch) c.sampler.batch = *o.batch;
  if (o.num_seeds) c.num_seeds = *o.num_seeds;
  if (o.max_steps) c.max_postproc_steps = *o.max_steps;
  if (o.variants) c.variants = *o.variants;
  if (o.projection_counts) c.projection_counts = *o.projection_counts;
  if (o.stochastic) c.projection.stochastic = true;
  if (o.counts) {
    if (o.counts->size() != kNumClasses) {
      throw ConfigError("--counts: expected 3 values (stand,walk,hop)");
    }
    for (int k = 0; k < kNumClasses; ++k) c.datagen.counts[k] = (*o.counts)[k];
  }
  c.ApplySeed();
  c.Validate();
  return c;
}

void RequirePath(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) {
    throw MissingInputError(what + " not found: " + p.string());
  }
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

void WriteText(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

MotionDenoiser LoadDenoiser(const RunConfig& c) {
  RequirePath(fs::path(c.denoiser) / "denoiser.json", "denoiser checkpoint");
  return MotionDenoiser::Load(c.denoiser);
}

ImitationPolicy LoadPolicy(const RunConfig& c) {
  RequirePath(fs::path(c.policy) / "policy.json", "policy checkpoint");
  return ImitationPolicy::Load(c.policy);
}

std::optional<MotionClassifier> LoadClassifierIfPresent(const RunConfig& c) {
  if (!fs::exists(fs::path(c.classifier) / "classifier.json")) {
    std::fprintf(stderr, "note: no classifier at %s, accuracy omitted\n",
                 c.classifier.c_str());
    return std::nullopt;
  }
  return MotionClassifier::Load(c.classifier);
}

MotionDataset LoadDatasetChecked(const RunConfig& c) {
  RequirePath(fs::path(c.dataset) / kManifestName, "dataset manifest");
  return LoadDataset(c.dataset);
}

int RunDatagen(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  const MotionDataset ds = BuildDataset(c.dataset, c.datagen);
  WriteRunManifest(c.dataset, "datagen", c, Seconds(start));
  std::printf("wrote %zu motions to %s\n", ds.motions.size(),
              c.dataset.c_str());
  return kExitOk;
}

int RunTrainDenoiser(const RunConfig& c, std::optional<int> epochs) {
  const auto start = std::chrono::steady_clock::now();
  const MotionDataset ds = LoadDatasetChecked(c);
  DenoiserTrainConfig tc = c.denoiser_train;
  if (epochs) tc.epochs = *epochs;
  std::fprintf(stderr, "training denoiser on %zu motions for %d epochs\n",
               ds.motions.size(), tc.epochs);
  const DenoiserTrainResult r = TrainDenoiser(ds.motions, tc);
  std::vector<Motion> val;
  for (int i : r.val_indices) val.push_back(ds.motions[i]);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double zero_loss = nan;
  const double val_loss =
      val.empty() ? nan
                  : EvaluateDenoiserLoss(r.model, val, r.model.sigma_min(),
                                         c.seed, &zero_loss);
  const double train_loss = r.loss_history.empty() ? nan : r.loss_history.back();
  // NaN entries become JSON null.
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  const nlohmann::json summary = {{"seed", c.seed},
                                  {"train", tc.ToJson()},
                                  {"final_train_loss", num(train_loss)},
                                  {"val_loss_sigma_min", num(val_loss)},
                                  {"zero_predictor_loss", num(zero_loss)}};
  r.model.Save(c.denoiser, summary);
  Table t({"epoch", "train_loss"});
  for (size_t e = 0; e < r.loss_history.size(); ++e) {
    t.AddRow({std::to_string(e), FormatDouble(r.loss_history[e], 6)});
  }
  WriteText(fs::path(c.denoiser) / "loss_history.csv", t.ToCsv());
  WriteRunManifest(c.denoiser, "train-denoiser", c, Seconds(start), summary);
  if (val.empty()) {
    std::printf("final train loss %.5f (no validation split)\n", train_loss);
  } else {
    std::printf("final train loss %.5f, val loss %.5f (zero predictor %.5f)\n",
                train_loss, val_loss, zero_loss);
  }
  return kExitOk;
}

int RunTrainPolicy(const RunConfig& c, std::optional<int> epochs) {
  const auto start = std::chrono::steady_clock::now();
  const MotionDataset ds = LoadDatasetChecked(c);
  PpoConfig ppo = c.ppo;
  if (epochs) ppo.epochs = *epochs;
  Table log({"epoch", "mean_reward", "r_pose", "r_velocity", "r_joint",
             "r_orientation", "episode_length"});
  const PolicyTrainResult r =
      TrainPolicy(ds.motions, c.sim, ppo, c.reward, [&](const EpochStats& s) {
        log.AddRow({std::to_string(s.epoch), FormatDouble(s.mean_reward),
                    FormatDouble(s.sub_rewards[0]),
                    FormatDouble(s.sub_rewards[1]),
                    FormatDouble(s.sub_rewards[2]),
                    FormatDouble(s.sub_rewards[3]),
                    FormatDouble(s.mean_episode_length, 1)});
        if (s.epoch % 25 == 0 || s.epoch + 1 == ppo.epochs) {
          std::fprintf(stderr, "epoch %4d  reward %.3f  (%.0f s)\n", s.epoch,
                       s.mean_reward, Seconds(start));
        }
      });
  const nlohmann::json summary = {{"seed", c.seed}, {"ppo", ppo.ToJson()}};
  r.policy.Save(c.policy, summary);
  WriteText(fs::path(c.policy) / "training_log.csv", log.ToCsv());
  WriteRunManifest(c.policy, "train-policy", c, Seconds(start), summary);
  std::printf("saved policy to %s\n", c.policy.c_str());
  return kExitOk;
}

int RunTrainClassifier(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  const MotionDataset ds = LoadDatasetChecked(c);
  std::vector<Condition> labels;
  for (const Motion& m : ds.motions) labels.push_back(m.condition);
  MotionClassifier clf(c.classifier_train.hidden, c.classifier_train.seed);
  clf.Train(ds.motions, labels, c.classifier_train);
  const double acc = EvalAccuracy(clf, ds.motions, labels);
  clf.Save(c.classifier);
  WriteRunManifest(c.classifier, "train-classifier", c, Seconds(start),
                   {{"train_accuracy", acc}});
  std::printf("training accuracy %.4f\n", acc);
  return kExitOk;
}

int RunSample(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  const MotionDenoiser den = LoadDenoiser(c);
  const ProjectionSchedule schedule = ProjectionSchedule::Parse(c.schedule);
  const std::vector<int> steps = schedule.Resolve(c.sampler.T);
  std::optional<ImitationPolicy> policy;
  if (!steps.empty()) policy = LoadPolicy(c);
  std::optional<PolicyProjector> projector;
  if (policy) projector.emplace(*policy, c.sim, c.projection);
  const std::vector<Motion> motions =
      SampleMotions(den, projector ? &*projector : nullptr, steps,
                    den.Schedule(c.sampler.T),
                    BalancedConditions(c.sampler.batch), c.sampler);
  const fs::path dir = c.OutputRoot() / "samples";
  WriteMotionDir(dir, motions, "sample");
  WriteRunManifest(dir, "sample", c, Seconds(start),
                   {{"schedule", schedule.ToString()}, {"steps", steps}});
  std::printf("wrote %zu samples to %s\n", motions.size(),
              dir.string().c_str());
  return kExitOk;
}

int RunProject(const RunConfig& c, const Overrides& o) {
  const auto start = std::chrono::steady_clock::now();
  if (o.input.empty()) throw ConfigError("--input: required");
  if (o.steps < 0) throw ConfigError("--steps: must be >= 0");
  RequirePath(o.input, "input motion directory");
  const ImitationPolicy policy = LoadPolicy(c);
  const std::vector<Motion> in = ReadMotionDir(o.input);
  const std::vector<Motion> out =
      PostProcess(in, policy, c.sim, c.projection, o.steps);
  const fs::path dir = c.OutputRoot() / "projected";
  WriteMotionDir(dir, out, "projected");
  WriteRunManifest(dir, "project", c, Seconds(start),
                   {{"input", o.input}, {"steps", o.steps}});
  std::printf("projected %zu motions (%d passes) into %s\n", out.size(),
              o.steps, dir.string().c_str());
  return kExitOk;
}

int RunEvaluate(const RunConfig& c, const Overrides& o) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path input = o.input.empty() ? c.OutputRoot() / "samples"
                                         : fs::path(o.input);
  RequirePath(input, "input motion directory");
  const std::vector<Motion> motions = ReadMotionDir(input);
  const MotionDataset ds = LoadDatasetChecked(c);
  const FeatureStats reference = ReferenceStats(ds.motions);
  const std::optional<MotionClassifier> clf = LoadClassifierIfPresent(c);
  const MotionSetReport r =
      EvaluateMotionSet(motions, &reference, clf ? &*clf : nullptr);
  const fs::path dir = c.OutputRoot() / "evaluate";
  nlohmann::json doc = r.ToJson();
  doc["run_id"] = "evaluate-seed" + std::to_string(c.seed);
  doc["input"] = input.string();
  doc["seed"] = c.seed;
  doc["config"] = c.ToJson();
  WriteJsonFile(dir / "report.json", doc);
  WriteText(dir / "metrics.csv", r.RowsCsv());
  WriteRunManifest(dir, "evaluate", c, Seconds(start));
  Table t({"metric", "mean", "std"});
  t.AddRow({"penetrate_mm", FormatDouble(r.mean.penetrate),
            FormatDouble(r.stddev.penetrate)});
  t.AddRow({"float_mm", FormatDouble(r.mean.float_mm),
            FormatDouble(r.stddev.float_mm)});
  t.AddRow({"skate_mm", FormatDouble(r.mean.skate),
            FormatDouble(r.stddev.skate)});
  t.AddRow({"phys_err_mm", FormatDouble(r.mean.phys_err),
            FormatDouble(r.stddev.phys_err)});
  t.AddRow({"fid_proxy", FormatDouble(r.fid), ""});
  t.AddRow({"accuracy", FormatDouble(r.accuracy), ""});
  std::cout << t.ToText();
  return kExitOk;
}

ExperimentModels LoadModels(const RunConfig& c, const MotionDenoiser& den,
                            const ImitationPolicy& policy,
                            const std::optional<MotionClassifier>& clf) {
  ExperimentModels m;
  m.denoiser = &den;
  m.policy = &policy;
  m.classifier = clf ? &*clf : nullptr;
  m.reference = ReferenceStats(LoadDatasetChecked(c).motions);
  return m;
}

int WriteExperiment(const RunConfig& c, const std::string& command,
                    const ExperimentReport& report,
                    std::chrono::steady_clock::time_point start) {
  const fs::path dir = c.OutputRoot() / command;
  nlohmann::json doc = report.ToJson();
  doc["seed"] = c.seed;
  WriteJsonFile(dir / "report.json", doc);
  WriteText(dir / "rows.csv", report.ToTable().ToCsv());
  WriteRunManifest(dir, command, c, Seconds(start),
                   {{"complete", report.complete}});
  std::cout << report.ToTable().ToText();
  if (!report.complete) {
    std::fprintf(stderr, "%s aborted: %s (partial results kept in %s)\n",
                 command.c_str(), report.error.c_str(), dir.string().c_str());
    return kExitRuntime;
  }
  return kExitOk;
}

int RunSweepSchedule(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  const MotionDenoiser den = LoadDenoiser(c);
  const ImitationPolicy policy = LoadPolicy(c);
  const std::optional<MotionClassifier> clf = LoadClassifierIfPresent(c);
  const ExperimentModels models = LoadModels(c, den, policy, clf);
  const ExperimentReport report =
      RunScheduleSweep(models, c, [&](const ExperimentRow& r) {
        std::fprintf(stderr, "%-8s %-14s seed %-4s phys_err %.3f (%.0f s)\n",
                     r.group.c_str(), r.variant.c_str(),
                     r.seed < 0 ? "mean" : std::to_string(r.seed).c_str(),
                     r.metrics.phys_err, Seconds(start));
      });
  return WriteExperiment(c, "sweep-schedule", report, start);
}

int RunComparePostproc(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  const MotionDenoiser den = LoadDenoiser(c);
  const ImitationPolicy policy = LoadPolicy(c);
  const std::optional<MotionClassifier> clf = LoadClassifierIfPresent(c);
  const ExperimentModels models = LoadModels(c, den, policy, clf);
  const ExperimentReport report = RunPostprocComparison(models, c);
  std::printf("k = 1 post-processing identical to schedule {0}: %s\n",
              report.k1_identity ? "yes" : "no");
  return WriteExperiment(c, "compare-postproc", report, start);
}

int Main(int argc, char** argv) {
  CLI::App app{"Physics-guided motion diffusion toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Overrides o;
  std::optional<int> epochs;

  auto* datagen = app.add_subcommand("datagen", "Generate the gait dataset");
  AddCommonFlags(datagen, &o);
  datagen->add_option("--counts", o.counts, "Per-class counts: stand walk hop")
      ->expected(3);

  auto* train_den =
      app.add_subcommand("train-denoiser", "Train the motion denoiser");
  AddCommonFlags(train_den, &o);
  train_den->add_option("--epochs", epochs, "Training epochs");

  auto* train_pol =
      app.add_subcommand("train-policy", "Train the imitation policy (PPO)");
  AddCommonFlags(train_pol, &o);
  train_pol->add_option("--epochs", epochs, "PPO epochs");

  auto* train_clf =
      app.add_subcommand("train-classifier", "Train the action classifier");
  AddCommonFlags(train_clf, &o);

  auto* sample = app.add_subcommand(
      "sample", "Sample motions (schedule 'none' gives plain DDIM)");
  AddCommonFlags(sample, &o);
  AddSamplerFlags(sample, &o);
  sample->add_option("--schedule", o.schedule,
                     "none | uniform:N | startend:M:N | end:N:S | "
                     "explicit:t1,t2,...");

  auto* project = app.add_subcommand(
      "project", "Project motions with the policy (post-processing)");
  AddCommonFlags(project, &o);
  project->add_option("--input", o.input, "Directory of motion files")
      ->required();
  project->add_option("--steps", o.steps, "Number of projection passes");
  project->add_flag("--stochastic", o.stochastic, "Sample policy actions");

  auto* evaluate = app.add_subcommand("evaluate", "Metrics report");
  AddCommonFlags(evaluate, &o);
  evaluate->add_option("--input", o.input,
                       "Directory of motion files (default <out>/samples)");

  auto* sweep = app.add_subcommand("sweep-schedule",
                                   "Compare projection schedules and counts");
  AddCommonFlags(sweep, &o);
  AddSamplerFlags(sweep, &o);
  sweep->add_option("--num-seeds", o.num_seeds, "Repeats per cell");
  sweep->add_option("--variants", o.variants, "Schedule variants");
  sweep->add_option("--projection-counts", o.projection_counts,
                    "Projection counts for the End-N-Space-1 curve");

  auto* compare = app.add_subcommand(
      "compare-postproc", "In-loop projection versus post-processing");
  AddCommonFlags(compare, &o);
  AddSamplerFlags(compare, &o);
  compare->add_option("--num-seeds", o.num_seeds, "Repeats per cell");
  compare->add_option("--max-steps", o.max_steps, "Largest k");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    const RunConfig c = BuildConfig(o);
    if (*datagen) return RunDatagen(c);
    if (*train_den) return RunTrainDenoiser(c, epochs);
    if (*train_pol) return RunTrainPolicy(c, epochs);
    if (*train_clf) return RunTrainClassifier(c);
    if (*sample) return RunSample(c);
    if (*project) return RunProject(c, o);
    if (*evaluate) return RunEvaluate(c, o);
    if (*sweep) return RunSweepSchedule(c);
    if (*compare) return RunComparePostproc(c);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace
}  // namespace physguide

int main(int argc, char** argv) { return physguide::Main(argc, argv); }
