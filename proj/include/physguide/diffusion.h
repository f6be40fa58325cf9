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

#ifndef PHYSGUIDE_DIFFUSION_H_
#define PHYSGUIDE_DIFFUSION_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "physguide/character.h"

namespace physguide {

// Ascending noise levels sigma[0] = 0 < sigma[1] < ... < sigma[T].
struct NoiseSchedule {
  std::vector<double> sigma;

  int T() const { return static_cast<int>(sigma.size()) - 1; }
  void Validate() const;
};

// Geometric spacing between sigma_min (t = 1) and sigma_max (t = T).
NoiseSchedule BuildNoiseSchedule(int T, double sigma_min, double sigma_max);

// Variance of the stochastic update from sigma_t to sigma_s:
//   v = (1 - eta)^2 sigma_s^2 (sigma_t^2 - sigma_s^2) / sigma_t^2.
// eta = 0 gives the ancestral posterior variance, eta = 1 a deterministic
// update.
double VarianceV(double eta, double sigma_t, double sigma_s);

// Denoiser contract shared by the sampler and the trainable model. Samples
// live in a fixed-size feature space (one column per chain); Encode and
// Decode map between features and motions.
class DenoiserModel {
 public:
  virtual ~DenoiserModel() = default;

  virtual int feature_dim() const = 0;
  virtual Eigen::MatrixXd Denoise(const Eigen::MatrixXd& x, double sigma,
                                  const std::vector<Condition>& c) const = 0;
  virtual Eigen::VectorXd Encode(const Motion& motion) const = 0;
  virtual Motion Decode(const Eigen::VectorXd& features,
                        Condition c) const = 0;
};

struct ProjectionResult {
  Motion motion;
  bool failed = false;
  int divergences = 0;
};

// Maps a motion to a physically simulated one. Implementations must be safe
// to call concurrently.
class MotionProjector {
 public:
  virtual ~MotionProjector() = default;
  virtual ProjectionResult Project(const Motion& motion) const = 0;
};

class ProjectionFailedError : public std::runtime_error {
 public:
  ProjectionFailedError(int step, int chain);
  int step() const { return step_; }
  int chain() const { return chain_; }

 private:
  int step_;
  int chain_;
};

// x_u + w (x_c - x_u). Columns whose condition is kNull get x_u. When every
// condition is kNull the denoiser is called once.
Eigen::MatrixXd GuidedDenoise(const DenoiserModel& denoiser,
                              const Eigen::MatrixXd& x_t, double sigma,
                              const std::vector<Condition>& c, double w);

// One update from sigma_t to sigma_s. Draws from `rng` only when the
// variance is positive.
Eigen::VectorXd DdimStep(const Eigen::VectorXd& x_denoised,
                         const Eigen::VectorXd& x_t, double sigma_t,
                         double sigma_s, double eta, std::mt19937_64* rng,
                         std::normal_distribution<double>* normal);

struct ProjectionSchedule {
  enum class Kind { kNone, kUniform, kStartEnd, kEndSpace, kExplicit };

  Kind kind = Kind::kNone;
  int n = 0;  // uniform:N, startend:M:N (end count), end:N:S
  int m = 0;  // startend:M:N (start count)
  int s = 0;  // end:N:S spacing
  std::vector<int> steps;  // explicit

  // Grammar: none | uniform:N | startend:M:N | end:N:S | explicit:t1,t2,...
  static ProjectionSchedule Parse(const std::string& text);
  std::string ToString() const;
  // Sorted step indices in [0, T-1]. Throws std::invalid_argument on
  // overlapping or out-of-range steps.
  std::vector<int> Resolve(int T) const;
};

struct SamplerConfig {
  int T = 50;
  double eta = 0.0;
  double guidance_w = 2.5;
  uint64_t seed = 0;
  int batch = 64;
  int motion_len = 60;

  void Validate() const;
};

// Guided sampling loop. For t = T..1 the denoised estimate is replaced by
// its projection whenever t - 1 is in `projection_steps`. Chain i uses an
// rng seeded with config.seed + i. At the last step the returned motion is
// the decoded (or projected) estimate itself.
std::vector<Motion> SampleMotions(const DenoiserModel& denoiser,
                                  const MotionProjector* projector,
                                  const std::vector<int>& projection_steps,
                                  const NoiseSchedule& noise,
                                  const std::vector<Condition>& conditions,
                                  const SamplerConfig& config);

}  // namespace physguide

#endif  // PHYSGUIDE_DIFFUSION_H_
