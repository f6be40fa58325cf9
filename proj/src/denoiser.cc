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

#include "physguide/denoiser.h"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <random>

#include "physguide/motion_io.h"

namespace physguide {
namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kManifestFile = "denoiser.json";
constexpr const char* kWeightsFile = "denoiser.bin";

std::vector<int> NetworkSizes(int dim, const std::vector<int>& hidden) {
  std::vector<int> sizes = {dim + kNoiseEmbedDim + kConditionSlots};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(dim);
  return sizes;
}

// Row-major frames: feature index = frame * kPoseDim + dim.
PoseVector RawFrame(const Motion& motion, int h) {
  PoseVector v = motion.frames[h].ToVector();
  if (h > 0) v[0] -= motion.frames[h - 1].x;
  return v;
}

uint64_t MixSeed(uint64_t seed, uint64_t a, uint64_t b) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(a), static_cast<uint32_t>(b)};
  std::array<uint32_t, 2> out;
  seq.generate(out.begin(), out.end());
  return (static_cast<uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

MotionCodec MotionCodec::Fit(const std::vector<Motion>& motions,
                             double std_floor) {
  if (motions.empty()) throw std::invalid_argument("codec needs motions");
  MotionCodec codec;
  codec.horizon = motions[0].length();
  codec.fps = motions[0].fps;
  std::array<double, kPoseDim> sum{}, sq{};
  double count = 0;
  for (const Motion& m : motions) {
    if (m.length() != codec.horizon) {
      throw std::invalid_argument("all motions must share one length");
    }
    for (int h = 0; h < m.length(); ++h) {
      const PoseVector v = RawFrame(m, h);
      for (int d = 0; d < kPoseDim; ++d) {
        sum[d] += v[d];
        sq[d] += v[d] * v[d];
      }
      count += 1;
    }
  }
  for (int d = 0; d < kPoseDim; ++d) {
    codec.mean[d] = sum[d] / count;
    const double var = std::max(0.0, sq[d] / count - codec.mean[d] * codec.mean[d]);
    codec.scale[d] = std::max(std::sqrt(var), std_floor);
  }
  return codec;
}

Eigen::VectorXd MotionCodec::Encode(const Motion& motion) const {
  if (motion.length() != horizon) {
    throw std::invalid_argument("motion length " +
                                std::to_string(motion.length()) +
                                " does not match codec horizon " +
                                std::to_string(horizon));
  }
  Eigen::VectorXd f(feature_dim());
  for (int h = 0; h < horizon; ++h) {
    const PoseVector v = RawFrame(motion, h);
    for (int d = 0; d < kPoseDim; ++d) {
      f[h * kPoseDim + d] = (v[d] - mean[d]) / scale[d];
    }
  }
  return f;
}

Motion MotionCodec::Decode(const Eigen::VectorXd& features, Condition c,
                           const CharacterModel& character) const {
  if (features.size() != feature_dim()) {
    throw std::invalid_argument("feature vector has wrong size");
  }
  Motion m;
  m.fps = fps;
  m.condition = c;
  m.character = character;
  m.frames.resize(horizon);
  double x = 0.0;
  for (int h = 0; h < horizon; ++h) {
    PoseVector v;
    for (int d = 0; d < kPoseDim; ++d) {
      v[d] = features[h * kPoseDim + d] * scale[d] + mean[d];
    }
    x = h == 0 ? v[0] : x + v[0];
    v[0] = x;
    for (int d = 2; d < kPoseDim; ++d) v[d] = WrapAngle(v[d]);
    m.frames[h] = Pose::FromVector(v);
  }
  return m;
}

nlohmann::json MotionCodec::ToJson() const {
  return {{"horizon", horizon}, {"fps", fps}, {"mean", mean}, {"scale", scale}};
}

MotionCodec MotionCodec::FromJson(const nlohmann::json& j) {
  MotionCodec c;
  c.horizon = j.at("horizon").get<int>();
  c.fps = j.at("fps").get<double>();
  c.mean = j.at("mean").get<std::array<double, kPoseDim>>();
  c.scale = j.at("scale").get<std::array<double, kPoseDim>>();
  return c;
}

void DenoiserTrainConfig::Validate() const {
  if (epochs < 0) throw std::invalid_argument("denoiser.epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("denoiser.batch_size must be >= 1");
  if (!(learning_rate > 0)) {
    throw std::invalid_argument("denoiser.learning_rate must be > 0");
  }
  if (!(cond_dropout >= 0 && cond_dropout <= 1)) {
    throw std::invalid_argument("denoiser.cond_dropout must lie in [0, 1]");
  }
  if (optimizer != "adam" && optimizer != "momentum") {
    throw std::invalid_argument("denoiser.optimizer must be adam or momentum");
  }
  if (!(val_fraction >= 0 && val_fraction < 1)) {
    throw std::invalid_argument("denoiser.val_fraction must lie in [0, 1)");
  }
  if (!(sigma_min_factor > 0 && sigma_max_factor > sigma_min_factor)) {
    throw std::invalid_argument("denoiser sigma factors must satisfy 0 < min < max");
  }
  if (hidden.empty()) throw std::invalid_argument("denoiser.hidden is empty");
  if (!(input_weight_decay >= 0 && learning_rate * input_weight_decay < 1)) {
    throw std::invalid_argument(
        "denoiser.input_weight_decay must be >= 0 with learning_rate * decay < 1");
  }
}

nlohmann::json DenoiserTrainConfig::ToJson() const {
  return {{"hidden", hidden},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"optimizer", optimizer},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"lr_decay_final", lr_decay_final},
          {"cond_dropout", cond_dropout},
          {"grad_clip", grad_clip},
          {"input_weight_decay", input_weight_decay},
          {"val_fraction", val_fraction},
          {"sigma_min_factor", sigma_min_factor},
          {"sigma_max_factor", sigma_max_factor},
          {"std_floor", std_floor},
          {"seed", seed}};
}

DenoiserTrainConfig DenoiserTrainConfig::FromJson(const nlohmann::json& j) {
  DenoiserTrainConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.optimizer = j.value("optimizer", c.optimizer);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.lr_decay_final = j.value("lr_decay_final", c.lr_decay_final);
  c.cond_dropout = j.value("cond_dropout", c.cond_dropout);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.input_weight_decay = j.value("input_weight_decay", c.input_weight_decay);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.sigma_min_factor = j.value("sigma_min_factor", c.sigma_min_factor);
  c.sigma_max_factor = j.value("sigma_max_factor", c.sigma_max_factor);
  c.std_floor = j.value("std_floor", c.std_floor);
  c.seed = j.value("seed", c.seed);
  return c;
}

MotionDenoiser::MotionDenoiser(MotionCodec codec,
                               const std::vector<int>& hidden, double data_std)
    : codec_(std::move(codec)),
      net_(NetworkSizes(codec_.feature_dim(), hidden), Activation::kSilu,
           /*output_bias=*/false),
      data_std_(data_std),
      sigma_min_(0.02 * data_std),
      sigma_max_(8.0 * data_std) {}

Eigen::MatrixXd MotionDenoiser::Denoise(const Eigen::MatrixXd& x,
                                        double sigma,
                                        const std::vector<Condition>& c) const {
  if (x.rows() != feature_dim()) {
    throw std::invalid_argument("denoiser input has " +
                                std::to_string(x.rows()) + " rows, expected " +
                                std::to_string(feature_dim()));
  }
  if (!(sigma >= 0)) throw std::invalid_argument("sigma must be >= 0");
  const std::vector<double> sigmas(x.cols(), sigma);
  const MatrixX<float> in =
      DenoiserInput<float>(x.cast<float>(), sigmas, c);
  return net_.Forward(in).cast<double>();
}

Eigen::VectorXd MotionDenoiser::Encode(const Motion& motion) const {
  return codec_.Encode(motion);
}

Motion MotionDenoiser::Decode(const Eigen::VectorXd& features,
                              Condition c) const {
  return codec_.Decode(features, c, CharacterModel::Default());
}

void MotionDenoiser::Save(const std::filesystem::path& dir,
                          const nlohmann::json& extra) const {
  std::filesystem::create_directories(dir);
  nlohmann::json j = {{"format_version", kCheckpointVersion},
                      {"kind", "denoiser"},
                      {"dims",
                       {{"horizon", codec_.horizon},
                        {"pose_dim", kPoseDim},
                        {"classes", kNumClasses},
                        {"noise_embed", kNoiseEmbedDim}}},
                      {"layer_sizes", net_.sizes()},
                      {"activation", ActivationName(net_.activation())},
                      {"output_bias", net_.output_bias()},
                      {"normalization", codec_.ToJson()},
                      {"data_std", data_std_},
                      {"sigma_min", sigma_min_},
                      {"sigma_max", sigma_max_},
                      {"weights", kWeightsFile}};
  for (const auto& [key, value] : extra.items()) j[key] = value;
  WriteJsonFile(dir / kManifestFile, j);
  WriteFloatBinary(dir / kWeightsFile, net_.Flatten());
}

MotionDenoiser MotionDenoiser::Load(const std::filesystem::path& dir) {
  const nlohmann::json j = ReadJsonFile(dir / kManifestFile);
  if (j.at("format_version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("unsupported denoiser checkpoint version");
  }
  MotionDenoiser d;
  d.codec_ = MotionCodec::FromJson(j.at("normalization"));
  d.net_ = Mlp<float>(j.at("layer_sizes").get<std::vector<int>>(),
                      ParseActivation(j.at("activation").get<std::string>()),
                      j.at("output_bias").get<bool>());
  if (d.net_.output_dim() != d.codec_.feature_dim()) {
    throw std::runtime_error("denoiser checkpoint dims are inconsistent");
  }
  d.data_std_ = j.at("data_std").get<double>();
  d.sigma_min_ = j.at("sigma_min").get<double>();
  d.sigma_max_ = j.at("sigma_max").get<double>();
  d.net_.Unflatten(ReadFloatBinary(dir / j.at("weights").get<std::string>()));
  return d;
}

TrainingDivergedError::TrainingDivergedError(const std::string& what,
                                             double last_finite_loss,
                                             uint64_t batch_seed)
    : std::runtime_error(what + " (last finite loss " +
                         std::to_string(last_finite_loss) + ", batch seed " +
                         std::to_string(batch_seed) + ")"),
      last_finite_loss_(last_finite_loss),
      batch_seed_(batch_seed) {}

Eigen::MatrixXd EncodeMotions(const DenoiserModel& model,
                              const std::vector<Motion>& motions) {
  Eigen::MatrixXd out(model.feature_dim(), motions.size());
  for (size_t i = 0; i < motions.size(); ++i) out.col(i) = model.Encode(motions[i]);
  return out;
}

DenoiserTrainResult TrainDenoiser(const std::vector<Motion>& motions,
                                  const DenoiserTrainConfig& config) {
  config.Validate();
  if (motions.empty()) throw std::invalid_argument("empty training set");

  DenoiserTrainResult result;
  std::mt19937_64 split_rng(config.seed);
  std::vector<int> order(motions.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), split_rng);
  const int val_count = std::min<int>(
      static_cast<int>(motions.size()) - 1,
      static_cast<int>(std::floor(config.val_fraction * motions.size())));
  result.val_indices.assign(order.begin(), order.begin() + val_count);
  result.train_indices.assign(order.begin() + val_count, order.end());
  std::sort(result.val_indices.begin(), result.val_indices.end());
  std::sort(result.train_indices.begin(), result.train_indices.end());

  std::vector<Motion> train;
  for (int i : result.train_indices) train.push_back(motions[i]);
  const MotionCodec codec = MotionCodec::Fit(train, config.std_floor);

  const int dim = codec.feature_dim();
  const int n = static_cast<int>(train.size());
  MatrixX<float> data(dim, n);
  std::vector<Condition> labels(n);
  for (int i = 0; i < n; ++i) {
    data.col(i) = codec.Encode(train[i]).cast<float>();
    labels[i] = train[i].condition;
  }
  const double mean = data.cast<double>().mean();
  const double data_std = std::sqrt(
      (data.cast<double>().array() - mean).square().sum() / data.size());

  MotionDenoiser model(codec, config.hidden, data_std);
  model.set_sigma_range(config.sigma_min_factor * data_std,
                        config.sigma_max_factor * data_std);
  model.net().InitRandom(MixSeed(config.seed, 1, 0), 0.1);
  // Condition weights start at zero so a class the model never sees with its
  // label behaves exactly like the null token.
  model.net().layers()[0].w.rightCols(kConditionSlots).setZero();

  AdamOptimizer<float> adam;
  MomentumOptimizer<float> momentum;
  if (config.optimizer == "adam") {
    adam = AdamOptimizer<float>(model.net(), config.learning_rate);
  } else {
    momentum = MomentumOptimizer<float>(model.net(), config.learning_rate,
                                        config.momentum);
  }

  const double log_lo = std::log(model.sigma_min());
  const double log_hi = std::log(model.sigma_max());
  const int batches = (n + config.batch_size - 1) / config.batch_size;
  const int total_steps = std::max(1, config.epochs * batches);
  double last_finite = std::numeric_limits<double>::quiet_NaN();
  int step = 0;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 shuffle_rng(MixSeed(config.seed, 2, 0));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (int b = 0; b < batches; ++b, ++step) {
      const uint64_t batch_seed = MixSeed(config.seed, 3 + epoch, b);
      std::mt19937_64 rng(batch_seed);
      std::normal_distribution<float> normal;
      std::uniform_real_distribution<double> uniform;
      const int begin = b * config.batch_size;
      const int count = std::min(config.batch_size, n - begin);
      MatrixX<float> clean(dim, count);
      MatrixX<float> noise(dim, count);
      std::vector<double> sigma(count);
      std::vector<Condition> cond(count);
      for (int i = 0; i < count; ++i) {
        const int idx = perm[begin + i];
        clean.col(i) = data.col(idx);
        sigma[i] = std::exp(log_lo + (log_hi - log_lo) * uniform(rng));
        cond[i] = uniform(rng) < config.cond_dropout ? Condition::kNull
                                                     : labels[idx];
        for (int d = 0; d < dim; ++d) noise(d, i) = normal(rng);
      }
      auto grad = model.net().ZeroGradient();
      const double loss =
          DenoiserLoss<float>(model.net(), clean, noise, sigma, cond, &grad);
      if (!std::isfinite(loss)) {
        throw TrainingDivergedError(
            "denoiser loss became non-finite at epoch " + std::to_string(epoch),
            last_finite, batch_seed);
      }
      last_finite = loss;
      epoch_loss += loss * count;
      ClipGradientNorm(&grad, config.grad_clip);
      const double progress = static_cast<double>(step) / total_steps;
      const double lr =
          config.learning_rate *
          (config.lr_decay_final +
           (1.0 - config.lr_decay_final) * 0.5 *
               (1.0 + std::cos(std::numbers::pi * progress)));
      if (config.optimizer == "adam") {
        adam.set_learning_rate(lr);
        adam.Step(&model.net(), grad);
      } else {
        momentum.set_learning_rate(lr);
        momentum.Step(&model.net(), grad);
      }
      if (config.input_weight_decay > 0.0) {
        model.net().layers()[0].w *=
            static_cast<float>(1.0 - lr * config.input_weight_decay);
      }
    }
    result.loss_history.push_back(epoch_loss / n);
  }
  if (!model.net().AllFinite()) {
    throw TrainingDivergedError("denoiser weights became non-finite",
                                last_finite, 0);
  }
  result.model = std::move(model);
  return result;
}

double EvaluateDenoiserLoss(const MotionDenoiser& model,
                            const std::vector<Motion>& motions, double sigma,
                            uint64_t seed, double* zero_baseline) {
  if (motions.empty()) throw std::invalid_argument("no motions to evaluate");
  const Eigen::MatrixXd clean = EncodeMotions(model, motions);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd noisy = clean;
  for (Eigen::Index i = 0; i < noisy.size(); ++i) {
    noisy.data()[i] += sigma * normal(rng);
  }
  std::vector<Condition> cond;
  for (const Motion& m : motions) cond.push_back(m.condition);
  const Eigen::MatrixXd out = model.Denoise(noisy, sigma, cond);
  if (zero_baseline) *zero_baseline = clean.squaredNorm() / clean.size();
  return (out - clean).squaredNorm() / clean.size();
}

}  // namespace physguide
