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

#ifndef PHYSGUIDE_DENOISER_H_
#define PHYSGUIDE_DENOISER_H_

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "physguide/character.h"
#include "physguide/diffusion.h"
#include "physguide/nn.h"

namespace physguide {

inline constexpr int kNoiseEmbedDim = 16;
// One-hot class slots; the null token is the all-zero block.
inline constexpr int kConditionSlots = kNumClasses;

// Maps motions of a fixed length to standardized feature vectors. Root x is
// stored as per-frame deltas (frame 0 keeps its absolute value); every pose
// dimension is then standardized with statistics pooled over frames.
struct MotionCodec {
  int horizon = 60;
  double fps = 30.0;
  std::array<double, kPoseDim> mean{};
  std::array<double, kPoseDim> scale{};  // floored standard deviation

  static MotionCodec Fit(const std::vector<Motion>& motions,
                         double std_floor = 1e-3);

  int feature_dim() const { return horizon * kPoseDim; }
  Eigen::VectorXd Encode(const Motion& motion) const;
  Motion Decode(const Eigen::VectorXd& features, Condition c,
                const CharacterModel& character) const;

  nlohmann::json ToJson() const;
  static MotionCodec FromJson(const nlohmann::json& j);
};

// 16 sinusoidal features of log(sigma).
template <typename Scalar>
Eigen::Matrix<Scalar, kNoiseEmbedDim, 1> NoiseEmbedding(double sigma) {
  Eigen::Matrix<Scalar, kNoiseEmbedDim, 1> e;
  const double ls = std::log(std::max(sigma, 1e-12));
  for (int k = 0; k < kNoiseEmbedDim / 2; ++k) {
    const double freq = 0.25 * std::pow(2.0, 0.75 * k);
    e[2 * k] = static_cast<Scalar>(std::sin(freq * ls));
    e[2 * k + 1] = static_cast<Scalar>(std::cos(freq * ls));
  }
  return e;
}

// Network input: [x / sqrt(sigma^2 + 1); embed(sigma); one-hot(c)], with
// an all-zero condition block for kNull.
template <typename Scalar>
MatrixX<Scalar> DenoiserInput(const MatrixX<Scalar>& x,
                              const std::vector<double>& sigma,
                              const std::vector<Condition>& c) {
  const Eigen::Index n = x.cols();
  if (static_cast<Eigen::Index>(sigma.size()) != n ||
      static_cast<Eigen::Index>(c.size()) != n) {
    throw std::invalid_argument("one sigma and condition per column required");
  }
  const Eigen::Index dim = x.rows();
  MatrixX<Scalar> in =
      MatrixX<Scalar>::Zero(dim + kNoiseEmbedDim + kConditionSlots, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar c_in = static_cast<Scalar>(1.0 / std::sqrt(sigma[i] * sigma[i] + 1.0));
    in.col(i).head(dim) = x.col(i) * c_in;
    in.col(i).segment(dim, kNoiseEmbedDim) = NoiseEmbedding<Scalar>(sigma[i]);
    if (c[i] != Condition::kNull) {
      in(dim + kNoiseEmbedDim + static_cast<int>(c[i]), i) = Scalar(1);
    }
  }
  return in;
}

// Mean squared error between the network's estimate of `clean` from
// clean + sigma * noise, averaged over every element. Accumulates parameter
// gradients into `grad` when it is non-null.
template <typename Scalar>
Scalar DenoiserLoss(const Mlp<Scalar>& net, const MatrixX<Scalar>& clean,
                    const MatrixX<Scalar>& noise,
                    const std::vector<double>& sigma,
                    const std::vector<Condition>& c,
                    std::vector<DenseLayer<Scalar>>* grad) {
  MatrixX<Scalar> noisy = clean;
  for (Eigen::Index i = 0; i < clean.cols(); ++i) {
    noisy.col(i) += static_cast<Scalar>(sigma[i]) * noise.col(i);
  }
  typename Mlp<Scalar>::Cache cache;
  const MatrixX<Scalar> out =
      net.Forward(DenoiserInput<Scalar>(noisy, sigma, c), grad ? &cache : nullptr);
  const MatrixX<Scalar> diff = out - clean;
  const Scalar count = static_cast<Scalar>(diff.size());
  if (grad) {
    net.Backward(cache, (Scalar(2) / count) * diff, grad, nullptr);
  }
  return diff.squaredNorm() / count;
}

struct DenoiserTrainConfig {
  std::vector<int> hidden = {512, 512, 512};
  int epochs = 400;
  int batch_size = 64;
  std::string optimizer = "momentum";  // "momentum" or "adam"
  double learning_rate = 0.1;
  double momentum = 0.9;
  double lr_decay_final = 0.1;  // cosine decay to lr * this factor
  double cond_dropout = 0.1;
  double grad_clip = 50.0;
  // Decoupled decay of the first layer's weights (not its biases), per unit
  // learning rate. Inputs the data never needs are then driven to zero.
  double input_weight_decay = 0.0;
  double val_fraction = 0.1;
  double sigma_min_factor = 0.02;  // times the data standard deviation
  double sigma_max_factor = 8.0;
  double std_floor = 1e-3;
  uint64_t seed = 0;

  void Validate() const;
  nlohmann::json ToJson() const;
  static DenoiserTrainConfig FromJson(const nlohmann::json& j);
};

class MotionDenoiser : public DenoiserModel {
 public:
  MotionDenoiser() = default;
  MotionDenoiser(MotionCodec codec, const std::vector<int>& hidden,
                 double data_std);

  int feature_dim() const override { return codec_.feature_dim(); }
  Eigen::MatrixXd Denoise(const Eigen::MatrixXd& x, double sigma,
                          const std::vector<Condition>& c) const override;
  Eigen::VectorXd Encode(const Motion& motion) const override;
  Motion Decode(const Eigen::VectorXd& features, Condition c) const override;

  // Writes denoiser.json and denoiser.bin into `dir`.
  void Save(const std::filesystem::path& dir,
            const nlohmann::json& extra = nlohmann::json::object()) const;
  static MotionDenoiser Load(const std::filesystem::path& dir);

  const MotionCodec& codec() const { return codec_; }
  Mlp<float>& net() { return net_; }
  const Mlp<float>& net() const { return net_; }
  double data_std() const { return data_std_; }
  double sigma_min() const { return sigma_min_; }
  double sigma_max() const { return sigma_max_; }
  void set_sigma_range(double lo, double hi) {
    sigma_min_ = lo;
    sigma_max_ = hi;
  }
  NoiseSchedule Schedule(int T) const {
    return BuildNoiseSchedule(T, sigma_min_, sigma_max_);
  }

 private:
  MotionCodec codec_;
  Mlp<float> net_;
  double data_std_ = 1.0;
  double sigma_min_ = 0.02;
  double sigma_max_ = 8.0;
};

class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(const std::string& what, double last_finite_loss,
                        uint64_t batch_seed);
  double last_finite_loss() const { return last_finite_loss_; }
  uint64_t batch_seed() const { return batch_seed_; }

 private:
  double last_finite_loss_;
  uint64_t batch_seed_;
};

struct DenoiserTrainResult {
  MotionDenoiser model;
  std::vector<double> loss_history;  // mean training loss per epoch
  std::vector<int> train_indices;
  std::vector<int> val_indices;
};

// Trains on motions of equal length. Labels come from Motion::condition.
DenoiserTrainResult TrainDenoiser(const std::vector<Motion>& motions,
                                  const DenoiserTrainConfig& config);

// Encoded features, one column per motion.
Eigen::MatrixXd EncodeMotions(const DenoiserModel& model,
                              const std::vector<Motion>& motions);

// Mean squared error of the denoiser at a fixed sigma with noise drawn from
// `seed`. When `zero_baseline` is non-null it receives the error of the
// constant-zero predictor on the same data.
double EvaluateDenoiserLoss(const MotionDenoiser& model,
                            const std::vector<Motion>& motions, double sigma,
                            uint64_t seed, double* zero_baseline = nullptr);

}  // namespace physguide

#endif  // PHYSGUIDE_DENOISER_H_
