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

#include "physguide/experiment.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "physguide/motion_io.h"

namespace physguide {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Repeat seeds are spaced wider than any batch so chains never share rngs.
constexpr uint64_t kRepeatStride = 1000003;

// Rejects keys that the defaults do not have.
void CheckKeys(const json& j, const json& defaults, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) {
      throw ConfigError(ctx + "." + key + ": unknown field");
    }
  }
}

template <typename T>
void Read(const json& j, const char* key, T* out, const std::string& ctx) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    *out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(ctx + "." + key + ": wrong type (got " +
                      it->dump() + ")");
  }
}

// Runs `fn`, prefixing any invalid_argument message with `ctx`.
template <typename Fn>
void Prefixed(const std::string& ctx, Fn fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(ctx + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

json SamplerToJson(const SamplerConfig& c) {
  return {{"T", c.T},
          {"eta", c.eta},
          {"guidance_w", c.guidance_w},
          {"batch", c.batch},
          {"motion_len", c.motion_len}};
}

SamplerConfig SamplerFromJson(const json& j, SamplerConfig c) {
  CheckKeys(j, SamplerToJson(c), "sampler");
  Read(j, "T", &c.T, "sampler");
  Read(j, "eta", &c.eta, "sampler");
  Read(j, "guidance_w", &c.guidance_w, "sampler");
  Read(j, "batch", &c.batch, "sampler");
  Read(j, "motion_len", &c.motion_len, "sampler");
  return c;
}

json RewardToJson(const RewardWeights& r) {
  return {{"w", r.w}, {"alpha", r.alpha}};
}

RewardWeights RewardFromJson(const json& j, RewardWeights r) {
  CheckKeys(j, RewardToJson(r), "reward");
  Read(j, "w", &r.w, "reward");
  Read(j, "alpha", &r.alpha, "reward");
  return r;
}

json ClassifierToJson(const ClassifierTrainConfig& c) {
  return {{"hidden", c.hidden},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}};
}

ClassifierTrainConfig ClassifierFromJson(const json& j,
                                         ClassifierTrainConfig c) {
  CheckKeys(j, ClassifierToJson(c), "classifier_train");
  Read(j, "hidden", &c.hidden, "classifier_train");
  Read(j, "epochs", &c.epochs, "classifier_train");
  Read(j, "batch_size", &c.batch_size, "classifier_train");
  Read(j, "learning_rate", &c.learning_rate, "classifier_train");
  return c;
}

json ProjectionToJson(const ProjectionConfig& c) {
  return {{"stochastic", c.stochastic},
          {"max_divergences", c.max_divergences}};
}

ProjectionConfig ProjectionFromJson(const json& j, ProjectionConfig c) {
  CheckKeys(j, ProjectionToJson(c), "projection");
  Read(j, "stochastic", &c.stochastic, "projection");
  Read(j, "max_divergences", &c.max_divergences, "projection");
  return c;
}

json DatagenToJson(const DatasetSpec& s) {
  json counts = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    counts[std::string(ConditionName(static_cast<Condition>(c)))] =
        s.counts[c];
  }
  return {{"counts", counts},
          {"ranges", s.RangesToJson()},
          {"horizon", s.horizon},
          {"fps", s.fps}};
}

DatasetSpec DatagenFromJson(const json& j, DatasetSpec s) {
  const json defaults = DatagenToJson(s);
  CheckKeys(j, defaults, "datagen");
  Read(j, "horizon", &s.horizon, "datagen");
  Read(j, "fps", &s.fps, "datagen");
  if (j.contains("counts")) {
    CheckKeys(j["counts"], defaults["counts"], "datagen.counts");
    for (int c = 0; c < kNumClasses; ++c) {
      const std::string name(ConditionName(static_cast<Condition>(c)));
      Read(j["counts"], name.c_str(), &s.counts[c], "datagen.counts");
    }
  }
  if (j.contains("ranges")) {
    CheckKeys(j["ranges"], defaults["ranges"], "datagen.ranges");
    for (int c = 0; c < kNumClasses; ++c) {
      const std::string name(ConditionName(static_cast<Condition>(c)));
      if (!j["ranges"].contains(name)) continue;
      const json& r = j["ranges"][name];
      const std::string ctx = "datagen.ranges." + name;
      CheckKeys(r, defaults["ranges"][name], ctx);
      GaitRanges& g = s.ranges[c];
      const std::pair<const char*, ParamRange*> fields[] = {
          {"frequency", &g.frequency},
          {"stride", &g.stride},
          {"hip_amp", &g.hip_amp},
          {"knee_amp", &g.knee_amp},
          {"bob_amp", &g.bob_amp}};
      for (const auto& [key, range] : fields) {
        std::array<double, 2> lohi = {range->lo, range->hi};
        Read(r, key, &lohi, ctx);
        *range = {lohi[0], lohi[1]};
      }
    }
  }
  return s;
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / v.size();
}

ProjectionSchedule CountSchedule(int count) {
  return ProjectionSchedule::Parse(
      count == 0 ? "none" : "end:" + std::to_string(count) + ":1");
}

bool SameMotions(const std::vector<Motion>& a, const std::vector<Motion>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].length() != b[i].length()) return false;
    for (int h = 0; h < a[i].length(); ++h) {
      if (a[i].frames[h].ToVector() != b[i].frames[h].ToVector()) return false;
    }
  }
  return true;
}

ExperimentRow MakeRow(const std::string& group, const std::string& variant,
                      int count, int seed, const MotionSetReport& r) {
  ExperimentRow row;
  row.group = group;
  row.variant = variant;
  row.count = count;
  row.seed = seed;
  row.metrics = r.mean;
  row.fid = r.fid;
  row.accuracy = r.accuracy;
  return row;
}

ExperimentRow MeanRow(const std::vector<ExperimentRow>& seeds) {
  ExperimentRow m = seeds.front();
  m.seed = -1;
  m.metrics = {};
  m.fid = 0.0;
  m.accuracy = 0.0;
  const double n = static_cast<double>(seeds.size());
  for (const ExperimentRow& r : seeds) {
    m.metrics.penetrate += r.metrics.penetrate / n;
    m.metrics.float_mm += r.metrics.float_mm / n;
    m.metrics.skate += r.metrics.skate / n;
    m.fid += r.fid / n;
    m.accuracy += r.accuracy / n;
  }
  m.metrics.phys_err = m.metrics.penetrate + m.metrics.float_mm + m.metrics.skate;
  return m;
}

}  // namespace

void RunConfig::ApplySeed() {
  datagen.seed = seed;
  denoiser_train.seed = seed;
  ppo.seed = seed;
  classifier_train.seed = seed;
  sampler.seed = seed;
  projection.seed = seed;
}

void RunConfig::Validate() const {
  Prefixed("datagen", [&] { datagen.Validate(); });
  Prefixed("denoiser_train", [&] { denoiser_train.Validate(); });
  Prefixed("ppo", [&] { ppo.Validate(); });
  Prefixed("reward", [&] { reward.Validate(); });
  Prefixed("sampler", [&] { sampler.Validate(); });
  Prefixed("sim", [&] { sim.Validate(); });
  Prefixed("schedule", [&] {
    ProjectionSchedule::Parse(schedule).Resolve(sampler.T);
  });
  for (size_t i = 0; i < variants.size(); ++i) {
    Prefixed("variants[" + std::to_string(i) + "]", [&] {
      ProjectionSchedule::Parse(variants[i]).Resolve(sampler.T);
    });
  }
  for (int c : projection_counts) {
    if (c < 0 || c > sampler.T) {
      throw ConfigError("projection_counts: " + std::to_string(c) +
                        " outside [0, sampler.T]");
    }
  }
  if (classifier_train.epochs < 1 || classifier_train.batch_size < 1 ||
      !(classifier_train.learning_rate > 0)) {
    throw ConfigError(
        "classifier_train: epochs, batch_size and learning_rate must be > 0");
  }
  if (projection.max_divergences < 0) {
    throw ConfigError("projection.max_divergences must be >= 0");
  }
  if (num_seeds < 1) throw ConfigError("num_seeds must be >= 1");
  if (max_postproc_steps < 0 || max_postproc_steps > sampler.T) {
    throw ConfigError("max_postproc_steps must lie in [0, sampler.T]");
  }
}

std::filesystem::path RunConfig::OutputRoot() const {
  if (!output.empty()) return output;
  if (const char* env = std::getenv(kOutputEnvVar); env && *env) return env;
  return "runs";
}

std::vector<int> RunConfig::ProjectionCounts() const {
  if (!projection_counts.empty()) return projection_counts;
  std::set<int> counts = {0, 1, 4, 12, sampler.T};
  std::vector<int> out;
  for (int c : counts) {
    if (c <= sampler.T) out.push_back(c);
  }
  return out;
}

json RunConfig::ToJson() const {
  return {{"dataset", dataset},
          {"denoiser", denoiser},
          {"policy", policy},
          {"classifier", classifier},
          {"output", output},
          {"seed", seed},
          {"datagen", DatagenToJson(datagen)},
          {"denoiser_train", denoiser_train.ToJson()},
          {"ppo", ppo.ToJson()},
          {"reward", RewardToJson(reward)},
          {"classifier_train", ClassifierToJson(classifier_train)},
          {"sampler", SamplerToJson(sampler)},
          {"schedule", schedule},
          {"sim", SimConfigToJson(sim)},
          {"projection", ProjectionToJson(projection)},
          {"num_seeds", num_seeds},
          {"max_postproc_steps", max_postproc_steps},
          {"variants", variants},
          {"projection_counts", projection_counts}};
}

RunConfig RunConfig::FromJson(const json& j) {
  RunConfig c;
  const json defaults = c.ToJson();
  CheckKeys(j, defaults, "config");
  Read(j, "dataset", &c.dataset, "config");
  Read(j, "denoiser", &c.denoiser, "config");
  Read(j, "policy", &c.policy, "config");
  Read(j, "classifier", &c.classifier, "config");
  Read(j, "output", &c.output, "config");
  Read(j, "seed", &c.seed, "config");
  Read(j, "schedule", &c.schedule, "config");
  Read(j, "num_seeds", &c.num_seeds, "config");
  Read(j, "max_postproc_steps", &c.max_postproc_steps, "config");
  Read(j, "variants", &c.variants, "config");
  Read(j, "projection_counts", &c.projection_counts, "config");
  if (j.contains("datagen")) c.datagen = DatagenFromJson(j["datagen"], c.datagen);
  if (j.contains("denoiser_train")) {
    CheckKeys(j["denoiser_train"], defaults["denoiser_train"], "denoiser_train");
    Prefixed("denoiser_train", [&] {
      c.denoiser_train = DenoiserTrainConfig::FromJson(j["denoiser_train"]);
    });
  }
  if (j.contains("ppo")) {
    CheckKeys(j["ppo"], defaults["ppo"], "ppo");
    Prefixed("ppo", [&] { c.ppo = PpoConfig::FromJson(j["ppo"]); });
  }
  if (j.contains("reward")) c.reward = RewardFromJson(j["reward"], c.reward);
  if (j.contains("classifier_train")) {
    c.classifier_train =
        ClassifierFromJson(j["classifier_train"], c.classifier_train);
  }
  if (j.contains("sampler")) c.sampler = SamplerFromJson(j["sampler"], c.sampler);
  if (j.contains("sim")) c.sim = SimConfigFromJson(j["sim"], c.sim);
  if (j.contains("projection")) {
    c.projection = ProjectionFromJson(j["projection"], c.projection);
  }
  c.ApplySeed();
  return c;
}

RunConfig RunConfig::Load(const std::filesystem::path& path) {
  json j;
  try {
    j = ReadJsonFile(path);
  } catch (const std::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return FromJson(j);
}

json SimConfigToJson(const SimConfig& c) {
  return {{"sim_hz", c.sim_hz},
          {"control_hz", c.control_hz},
          {"gravity", c.gravity},
          {"contacts_enabled", c.contacts_enabled},
          {"fall_contacts", c.fall_contacts},
          {"fall_contact_scale", c.fall_contact_scale},
          {"impact_speed", c.impact_speed},
          {"contact_stiffness", c.contact_stiffness},
          {"contact_damping", c.contact_damping},
          {"friction", c.friction},
          {"tangential_damping", c.tangential_damping},
          {"kp", c.kp},
          {"kd", c.kd},
          {"torque_limit", c.torque_limit},
          {"residual_force_cap", c.residual_force_cap},
          {"residual_torque_cap", c.residual_torque_cap},
          {"limit_stiffness", c.limit_stiffness},
          {"limit_damping", c.limit_damping},
          {"max_speed", c.max_speed}};
}

SimConfig SimConfigFromJson(const json& j, SimConfig c) {
  CheckKeys(j, SimConfigToJson(c), "sim");
  Read(j, "sim_hz", &c.sim_hz, "sim");
  Read(j, "control_hz", &c.control_hz, "sim");
  Read(j, "gravity", &c.gravity, "sim");
  Read(j, "contacts_enabled", &c.contacts_enabled, "sim");
  Read(j, "fall_contacts", &c.fall_contacts, "sim");
  Read(j, "fall_contact_scale", &c.fall_contact_scale, "sim");
  Read(j, "impact_speed", &c.impact_speed, "sim");
  Read(j, "contact_stiffness", &c.contact_stiffness, "sim");
  Read(j, "contact_damping", &c.contact_damping, "sim");
  Read(j, "friction", &c.friction, "sim");
  Read(j, "tangential_damping", &c.tangential_damping, "sim");
  Read(j, "kp", &c.kp, "sim");
  Read(j, "kd", &c.kd, "sim");
  Read(j, "torque_limit", &c.torque_limit, "sim");
  Read(j, "residual_force_cap", &c.residual_force_cap, "sim");
  Read(j, "residual_torque_cap", &c.residual_torque_cap, "sim");
  Read(j, "limit_stiffness", &c.limit_stiffness, "sim");
  Read(j, "limit_damping", &c.limit_damping, "sim");
  Read(j, "max_speed", &c.max_speed, "sim");
  return c;
}

json MotionSetReport::ToJson() const {
  auto metrics = [](const PhysMetrics& m) {
    return json{{"penetrate", m.penetrate},
                {"float", m.float_mm},
                {"skate", m.skate},
                {"phys_err", m.phys_err}};
  };
  json per_motion = json::array();
  for (size_t i = 0; i < rows.size(); ++i) {
    json r = metrics(rows[i]);
    r["index"] = i;
    per_motion.push_back(r);
  }
  return {{"count", rows.size()},
          {"mean", metrics(mean)},
          {"std", metrics(stddev)},
          {"fid_proxy", std::isnan(fid) ? json(nullptr) : json(fid)},
          {"accuracy", std::isnan(accuracy) ? json(nullptr) : json(accuracy)},
          {"per_motion", per_motion}};
}

std::string MotionSetReport::RowsCsv() const {
  Table t({"index", "penetrate", "float", "skate", "phys_err"});
  for (size_t i = 0; i < rows.size(); ++i) {
    t.AddRow({std::to_string(i), FormatDouble(rows[i].penetrate, 6),
              FormatDouble(rows[i].float_mm, 6), FormatDouble(rows[i].skate, 6),
              FormatDouble(rows[i].phys_err, 6)});
  }
  return t.ToCsv();
}

MotionSetReport EvaluateMotionSet(const std::vector<Motion>& motions,
                                  const FeatureStats* reference,
                                  const MotionClassifier* classifier) {
  if (motions.empty()) throw std::invalid_argument("no motions to evaluate");
  MotionSetReport r;
  std::vector<double> pen, flt, sk, pe;
  for (const Motion& m : motions) {
    const PhysMetrics p = ComputePhysMetrics(m);
    r.rows.push_back(p);
    pen.push_back(p.penetrate);
    flt.push_back(p.float_mm);
    sk.push_back(p.skate);
    pe.push_back(p.phys_err);
  }
  auto stats = [](const std::vector<double>& v, double* mean, double* sd) {
    *mean = Mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - *mean) * (x - *mean);
    *sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  };
  stats(pen, &r.mean.penetrate, &r.stddev.penetrate);
  stats(flt, &r.mean.float_mm, &r.stddev.float_mm);
  stats(sk, &r.mean.skate, &r.stddev.skate);
  stats(pe, &r.mean.phys_err, &r.stddev.phys_err);

  r.fid = kNaN;
  if (reference != nullptr && motions.size() >= 2) {
    r.fid = FidProxy(ReferenceStats(motions), *reference);
  }
  r.accuracy = kNaN;
  if (classifier != nullptr) {
    std::vector<Motion> labeled;
    std::vector<Condition> labels;
    for (const Motion& m : motions) {
      if (m.condition != Condition::kNull) {
        labeled.push_back(m);
        labels.push_back(m.condition);
      }
    }
    if (!labeled.empty()) r.accuracy = EvalAccuracy(*classifier, labeled, labels);
  }
  return r;
}

FeatureStats ReferenceStats(const std::vector<Motion>& motions) {
  std::vector<Eigen::VectorXd> features;
  features.reserve(motions.size());
  for (const Motion& m : motions) features.push_back(MotionFeatures(m));
  return FeatureStats::Fit(features);
}

std::vector<Condition> BalancedConditions(int n) {
  std::vector<Condition> c;
  for (int i = 0; i < n; ++i) c.push_back(static_cast<Condition>(i % kNumClasses));
  return c;
}

Table::Table(std::vector<std::string> header) : header_(std::move(header)) {}

void Table::AddRow(std::vector<std::string> row) {
  if (row.size() != header_.size()) {
    throw std::invalid_argument("table row has the wrong width");
  }
  rows_.push_back(std::move(row));
}

std::string Table::ToCsv() const {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      out << (i ? "," : "") << cells[i];
    }
    out << "\n";
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out.str();
}

std::string Table::ToText() const {
  std::vector<size_t> width(header_.size());
  for (size_t i = 0; i < header_.size(); ++i) width[i] = header_[i].size();
  for (const auto& r : rows_) {
    for (size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out << "  ";
      out << cells[i] << std::string(width[i] - cells[i].size(), ' ');
    }
    out << "\n";
  };
  line(header_);
  size_t total = 0;
  for (size_t w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << "\n";
  for (const auto& r : rows_) line(r);
  return out.str();
}

std::string FormatDouble(double v, int precision) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

uint64_t RepeatSeed(uint64_t base, int r) {
  return base + kRepeatStride * static_cast<uint64_t>(r);
}

std::vector<Motion> SampleBatch(const ExperimentModels& models,
                                const RunConfig& config,
                                const ProjectionSchedule& schedule,
                                uint64_t seed) {
  SamplerConfig sampler = config.sampler;
  sampler.seed = seed;
  const std::vector<int> steps = schedule.Resolve(sampler.T);
  const PolicyProjector projector(*models.policy, config.sim,
                                  config.projection);
  return SampleMotions(*models.denoiser, &projector, steps,
                       models.denoiser->Schedule(sampler.T),
                       BalancedConditions(sampler.batch), sampler);
}

std::vector<Motion> PostProcess(const std::vector<Motion>& motions,
                                const ImitationPolicy& policy,
                                const SimConfig& sim,
                                const ProjectionConfig& projection,
                                int steps) {
  std::vector<Motion> out = motions;
  for (int pass = 0; pass < steps; ++pass) {
    for (size_t i = 0; i < out.size(); ++i) {
      ProjectionResult r = ProjectMotion(policy, out[i], sim, projection);
      if (r.failed) throw ProjectionFailedError(pass, static_cast<int>(i));
      out[i] = std::move(r.motion);
    }
  }
  return out;
}

const ExperimentRow* ExperimentReport::Find(const std::string& group,
                                            const std::string& variant,
                                            int count, int seed) const {
  for (const ExperimentRow& r : rows) {
    if (r.group == group && r.variant == variant && r.count == count &&
        r.seed == seed) {
      return &r;
    }
  }
  return nullptr;
}

const ExperimentRow* ExperimentReport::Mean(const std::string& group,
                                            const std::string& variant,
                                            int count) const {
  return Find(group, variant, count, -1);
}

Table ExperimentReport::ToTable() const {
  Table t({"group", "variant", "count", "seed", "penetrate", "float", "skate",
           "phys_err", "fid_proxy", "accuracy"});
  for (const ExperimentRow& r : rows) {
    t.AddRow({r.group, r.variant, std::to_string(r.count),
              r.seed < 0 ? "mean" : std::to_string(r.seed),
              FormatDouble(r.metrics.penetrate), FormatDouble(r.metrics.float_mm),
              FormatDouble(r.metrics.skate), FormatDouble(r.metrics.phys_err),
              FormatDouble(r.fid), FormatDouble(r.accuracy)});
  }
  return t;
}

json ExperimentReport::ToJson() const {
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  json out = json::array();
  for (const ExperimentRow& r : rows) {
    out.push_back({{"group", r.group},
                   {"variant", r.variant},
                   {"count", r.count},
                   {"seed", r.seed < 0 ? json("mean") : json(r.seed)},
                   {"penetrate", r.metrics.penetrate},
                   {"float", r.metrics.float_mm},
                   {"skate", r.metrics.skate},
                   {"phys_err", r.metrics.phys_err},
                   {"fid_proxy", num(r.fid)},
                   {"accuracy", num(r.accuracy)}});
  }
  return {{"rows", out},
          {"complete", complete},
          {"error", error},
          {"k1_identity", k1_identity}};
}

ExperimentReport RunScheduleSweep(const ExperimentModels& models,
                                  const RunConfig& config,
                                  const RowCallback& on_row) {
  ExperimentReport report;
  // Identical (schedule, seed) cells are computed once.
  std::map<std::pair<std::string, int>, MotionSetReport> cache;
  auto cell = [&](const ProjectionSchedule& schedule, int r) {
    const auto key = std::make_pair(schedule.ToString(), r);
    auto it = cache.find(key);
    if (it == cache.end()) {
      const std::vector<Motion> motions = SampleBatch(
          models, config, schedule, RepeatSeed(config.sampler.seed, r));
      it = cache
               .emplace(key, EvaluateMotionSet(motions, &models.reference,
                                               models.classifier))
               .first;
    }
    return it->second;
  };
  auto emit = [&](const ExperimentRow& row) {
    report.rows.push_back(row);
    if (on_row) on_row(row);
  };
  auto run = [&](const std::string& group, const ProjectionSchedule& schedule,
                 int count) {
    std::vector<ExperimentRow> seeds;
    for (int r = 0; r < config.num_seeds; ++r) {
      seeds.push_back(MakeRow(group, schedule.ToString(), count, r,
                              cell(schedule, r)));
      emit(seeds.back());
    }
    emit(MeanRow(seeds));
  };
  try {
    for (const std::string& v : config.variants) {
      const ProjectionSchedule schedule = ProjectionSchedule::Parse(v);
      run("schedule", schedule,
          static_cast<int>(schedule.Resolve(config.sampler.T).size()));
    }
    for (int count : config.ProjectionCounts()) {
      run("count", CountSchedule(count), count);
    }
  } catch (const std::exception& e) {
    report.complete = false;
    report.error = e.what();
  }
  return report;
}

ExperimentReport RunPostprocComparison(const ExperimentModels& models,
                                       const RunConfig& config,
                                       const RowCallback& on_row) {
  ExperimentReport report;
  const int max_k = config.max_postproc_steps;
  std::map<std::pair<std::string, int>, std::vector<ExperimentRow>> by_cell;
  auto emit = [&](const ExperimentRow& row) {
    report.rows.push_back(row);
    by_cell[{row.group, row.count}].push_back(row);
    if (on_row) on_row(row);
  };
  bool identity = max_k >= 1;
  try {
    for (int r = 0; r < config.num_seeds; ++r) {
      const uint64_t seed = RepeatSeed(config.sampler.seed, r);
      const std::vector<Motion> ddim =
          SampleBatch(models, config, CountSchedule(0), seed);
      std::vector<Motion> post = ddim;
      for (int k = 0; k <= max_k; ++k) {
        if (k > 0) {
          post = PostProcess(post, *models.policy, config.sim,
                             config.projection, 1);
        }
        emit(MakeRow("postproc", "post-processing", k, r,
                     EvaluateMotionSet(post, &models.reference,
                                       models.classifier)));
        const std::vector<Motion> inloop =
            k == 0 ? ddim : SampleBatch(models, config, CountSchedule(k), seed);
        emit(MakeRow("inloop", CountSchedule(k).ToString(), k, r,
                     EvaluateMotionSet(inloop, &models.reference,
                                       models.classifier)));
        if (k == 1 && !SameMotions(post, inloop)) identity = false;
      }
    }
    for (int k = 0; k <= max_k; ++k) {
      for (const char* group : {"postproc", "inloop"}) {
        emit(MeanRow(by_cell[{group, k}]));
      }
    }
  } catch (const std::exception& e) {
    report.complete = false;
    report.error = e.what();
    identity = false;
  }
  report.k1_identity = identity;
  return report;
}

void WriteRunManifest(const std::filesystem::path& dir,
                      const std::string& command, const RunConfig& config,
                      double wall_seconds, const json& extra) {
  std::filesystem::create_directories(dir);
  json j = {{"command", command},
            {"version", kVersion},
            {"seed", config.seed},
            {"config", config.ToJson()},
            {"wall_time_s", wall_seconds}};
  for (const auto& [key, value] : extra.items()) j[key] = value;
  WriteJsonFile(dir / kRunManifestName, j);
}

std::vector<Motion> ReadMotionDir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("motion directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Motion> motions;
  for (const auto& f : files) {
    const json j = ReadJsonFile(f);
    if (j.is_object() && j.contains("frames")) motions.push_back(MotionFromJson(j));
  }
  if (motions.empty()) {
    throw std::runtime_error("no motion files in " + dir.string());
  }
  return motions;
}

void WriteMotionDir(const std::filesystem::path& dir,
                    const std::vector<Motion>& motions,
                    const std::string& prefix) {
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < motions.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%05zu.json", prefix.c_str(), i);
    WriteMotion(dir / name, motions[i]);
  }
}

}  // namespace physguide
