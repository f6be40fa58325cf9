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

#include "physguide/diffusion.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace physguide {
namespace {

int ParseInt(const std::string& text, const std::string& context) {
  size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw std::invalid_argument("bad integer '" + text + "' in schedule '" +
                                context + "'");
  }
  return value;
}

std::vector<std::string> Split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

}  // namespace

void NoiseSchedule::Validate() const {
  if (sigma.size() < 2) throw std::invalid_argument("noise schedule needs T >= 1");
  if (sigma[0] != 0.0) throw std::invalid_argument("sigma_0 must be 0");
  for (size_t t = 1; t < sigma.size(); ++t) {
    if (!(sigma[t] > sigma[t - 1]) || !std::isfinite(sigma[t])) {
      throw std::invalid_argument("noise levels must increase strictly");
    }
  }
}

NoiseSchedule BuildNoiseSchedule(int T, double sigma_min, double sigma_max) {
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) ||
      !std::isfinite(sigma_max)) {
    throw std::invalid_argument("need 0 < sigma_min < sigma_max");
  }
  NoiseSchedule s;
  s.sigma.assign(T + 1, 0.0);
  if (T == 1) {
    s.sigma[1] = sigma_max;
    return s;
  }
  const double ratio = sigma_max / sigma_min;
  for (int t = 1; t <= T; ++t) {
    s.sigma[t] =
        sigma_min * std::pow(ratio, static_cast<double>(t - 1) / (T - 1));
  }
  s.sigma[T] = sigma_max;
  return s;
}

double VarianceV(double eta, double sigma_t, double sigma_s) {
  if (!(sigma_s >= 0.0) || !(sigma_s < sigma_t)) {
    throw std::invalid_argument("variance needs 0 <= sigma_s < sigma_t");
  }
  const double keep = (1.0 - eta) * (1.0 - eta);
  const double ts = sigma_t * sigma_t;
  const double ss = sigma_s * sigma_s;
  return keep * ss * (ts - ss) / ts;
}

ProjectionFailedError::ProjectionFailedError(int step, int chain)
    : std::runtime_error("projection failed at diffusion step " +
                         std::to_string(step) + " (chain " +
                         std::to_string(chain) + ")"),
      step_(step),
      chain_(chain) {}

Eigen::MatrixXd GuidedDenoise(const DenoiserModel& denoiser,
                              const Eigen::MatrixXd& x_t, double sigma,
                              const std::vector<Condition>& c, double w) {
  if (static_cast<Eigen::Index>(c.size()) != x_t.cols()) {
    throw std::invalid_argument("one condition per sample column required");
  }
  const bool all_null = std::all_of(c.begin(), c.end(), [](Condition k) {
    return k == Condition::kNull;
  });
  if (all_null) return denoiser.Denoise(x_t, sigma, c);

  const Eigen::Index n = x_t.cols();
  Eigen::MatrixXd both(x_t.rows(), 2 * n);
  both << x_t, x_t;
  std::vector<Condition> conds(c);
  conds.resize(2 * n, Condition::kNull);
  const Eigen::MatrixXd out = denoiser.Denoise(both, sigma, conds);
  const Eigen::MatrixXd uncond = out.rightCols(n);
  Eigen::MatrixXd result = uncond + w * (out.leftCols(n) - uncond);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (c[i] == Condition::kNull) result.col(i) = uncond.col(i);
  }
  return result;
}

Eigen::VectorXd DdimStep(const Eigen::VectorXd& x_denoised,
                         const Eigen::VectorXd& x_t, double sigma_t,
                         double sigma_s, double eta, std::mt19937_64* rng,
                         std::normal_distribution<double>* normal) {
  if (x_denoised.size() != x_t.size()) {
    throw std::invalid_argument("denoised and noisy shapes differ");
  }
  const double v = VarianceV(eta, sigma_t, sigma_s);
  const double coef =
      std::sqrt(std::max(0.0, sigma_s * sigma_s - v)) / sigma_t;
  Eigen::VectorXd x_s =
      coef == 0.0 ? x_denoised : Eigen::VectorXd(x_denoised + coef * (x_t - x_denoised));
  if (v > 0.0) {
    const double sd = std::sqrt(v);
    for (Eigen::Index i = 0; i < x_s.size(); ++i) x_s[i] += sd * (*normal)(*rng);
  }
  return x_s;
}

ProjectionSchedule ProjectionSchedule::Parse(const std::string& text) {
  const std::vector<std::string> parts = Split(text, ':');
  if (parts.empty()) throw std::invalid_argument("empty schedule spec");
  ProjectionSchedule s;
  const std::string& name = parts[0];
  auto expect = [&](size_t count) {
    if (parts.size() != count) {
      throw std::invalid_argument("schedule '" + text + "' expects " +
                                  std::to_string(count - 1) + " parameter(s)");
    }
  };
  if (name == "none") {
    expect(1);
  } else if (name == "uniform") {
    expect(2);
    s.kind = Kind::kUniform;
    s.n = ParseInt(parts[1], text);
  } else if (name == "startend") {
    expect(3);
    s.kind = Kind::kStartEnd;
    s.m = ParseInt(parts[1], text);
    s.n = ParseInt(parts[2], text);
  } else if (name == "end") {
    expect(3);
    s.kind = Kind::kEndSpace;
    s.n = ParseInt(parts[1], text);
    s.s = ParseInt(parts[2], text);
  } else if (name == "explicit") {
    expect(2);
    s.kind = Kind::kExplicit;
    for (const std::string& item : Split(parts[1], ',')) {
      s.steps.push_back(ParseInt(item, text));
    }
  } else {
    throw std::invalid_argument("unknown schedule variant '" + name + "'");
  }
  return s;
}

std::string ProjectionSchedule::ToString() const {
  switch (kind) {
    case Kind::kNone:
      return "none";
    case Kind::kUniform:
      return "uniform:" + std::to_string(n);
    case Kind::kStartEnd:
      return "startend:" + std::to_string(m) + ":" + std::to_string(n);
    case Kind::kEndSpace:
      return "end:" + std::to_string(n) + ":" + std::to_string(s);
    case Kind::kExplicit: {
      std::string out = "explicit:";
      for (size_t i = 0; i < steps.size(); ++i) {
        out += (i ? "," : "") + std::to_string(steps[i]);
      }
      return out;
    }
  }
  return "none";
}

std::vector<int> ProjectionSchedule::Resolve(int T) const {
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  std::vector<int> raw;
  switch (kind) {
    case Kind::kNone:
      break;
    case Kind::kUniform:
      if (n < 1 || n > T) {
        throw std::invalid_argument("uniform:N needs 1 <= N <= T");
      }
      {
        // Even spacing across the first 90% of the steps, which places
        // uniform:4 at {0, 15, 30, 45} for T = 50.
        const int spacing = n > 1 ? std::max(1, (9 * T / 10) / (n - 1)) : 1;
        for (int k = 0; k < n; ++k) raw.push_back(k * spacing);
      }
      break;
    case Kind::kStartEnd:
      if (m < 0 || n < 0) {
        throw std::invalid_argument("startend:M:N needs M, N >= 0");
      }
      for (int t = T - m; t < T; ++t) raw.push_back(t);
      for (int t = 0; t < n; ++t) raw.push_back(t);
      break;
    case Kind::kEndSpace:
      if (n < 1 || s < 1) {
        throw std::invalid_argument("end:N:S needs N >= 1 and S >= 1");
      }
      for (int k = 0; k < n; ++k) raw.push_back(k * s);
      break;
    case Kind::kExplicit:
      raw = steps;
      break;
  }
  std::set<int> unique;
  for (int t : raw) {
    if (t < 0 || t >= T) {
      throw std::invalid_argument("schedule '" + ToString() + "' has step " +
                                  std::to_string(t) + " outside [0, " +
                                  std::to_string(T - 1) + "]");
    }
    if (!unique.insert(t).second) {
      throw std::invalid_argument("schedule '" + ToString() +
                                  "' repeats step " + std::to_string(t));
    }
  }
  return std::vector<int>(unique.begin(), unique.end());
}

void SamplerConfig::Validate() const {
  if (T < 1) throw std::invalid_argument("sampler.T must be >= 1");
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("sampler.eta must lie in [0, 1]");
  }
  if (!(guidance_w >= 0.0)) {
    throw std::invalid_argument("sampler.guidance_w must be >= 0");
  }
  if (batch < 1) throw std::invalid_argument("sampler.batch must be >= 1");
  if (motion_len < 2) {
    throw std::invalid_argument("sampler.motion_len must be >= 2");
  }
}

std::vector<Motion> SampleMotions(const DenoiserModel& denoiser,
                                  const MotionProjector* projector,
                                  const std::vector<int>& projection_steps,
                                  const NoiseSchedule& noise,
                                  const std::vector<Condition>& conditions,
                                  const SamplerConfig& config) {
  config.Validate();
  noise.Validate();
  const int T = noise.T();
  const int n = static_cast<int>(conditions.size());
  if (n < 1) throw std::invalid_argument("need at least one chain");
  const std::set<int> scheduled(projection_steps.begin(),
                                projection_steps.end());
  for (int t : scheduled) {
    if (t < 0 || t >= T) {
      throw std::invalid_argument("projection step " + std::to_string(t) +
                                  " outside [0, T-1]");
    }
  }
  if (!scheduled.empty() && projector == nullptr) {
    throw std::invalid_argument("projection schedule given without projector");
  }

  const int dim = denoiser.feature_dim();
  std::vector<std::mt19937_64> rngs;
  std::vector<std::normal_distribution<double>> normals(n);
  Eigen::MatrixXd x(dim, n);
  for (int i = 0; i < n; ++i) {
    rngs.emplace_back(config.seed + static_cast<uint64_t>(i));
    for (int d = 0; d < dim; ++d) {
      x(d, i) = noise.sigma[T] * normals[i](rngs[i]);
    }
  }

  std::vector<Motion> out(n);
  for (int t = T; t >= 1; --t) {
    const int s = t - 1;
    Eigen::MatrixXd denoised =
        GuidedDenoise(denoiser, x, noise.sigma[t], conditions, config.guidance_w);
    const bool project = scheduled.count(s) > 0;
    for (int i = 0; i < n; ++i) {
      if (project) {
        const Motion candidate = denoiser.Decode(denoised.col(i), conditions[i]);
        ProjectionResult r = projector->Project(candidate);
        if (r.failed) throw ProjectionFailedError(s, i);
        if (s == 0) {
          out[i] = std::move(r.motion);
          continue;
        }
        denoised.col(i) = denoiser.Encode(r.motion);
      } else if (s == 0) {
        out[i] = denoiser.Decode(denoised.col(i), conditions[i]);
        continue;
      }
      x.col(i) = DdimStep(denoised.col(i), x.col(i), noise.sigma[t],
                          noise.sigma[s], config.eta, &rngs[i], &normals[i]);
    }
  }
  return out;
}

}  // namespace physguide
