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

#ifndef PHYSGUIDE_NN_H_
#define PHYSGUIDE_NN_H_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace physguide {

enum class Activation { kTanh, kSilu };

std::string ActivationName(Activation a);
Activation ParseActivation(const std::string& name);

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> w;  // out x in
  VectorX<Scalar> b;  // empty for a bias-free layer
};

// Fully-connected network. Batches are column-major: one sample per column.
// Hidden layers use `activation`; the output layer is linear.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  using Layers = std::vector<DenseLayer<Scalar>>;

  struct Cache {
    std::vector<Matrix> inputs;  // input of every layer
    std::vector<Matrix> pre;     // pre-activation of every hidden layer
  };

  Mlp() = default;
  Mlp(std::vector<int> sizes, Activation activation, bool output_bias)
      : sizes_(std::move(sizes)),
        activation_(activation),
        output_bias_(output_bias) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs >= 2 sizes");
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
      DenseLayer<Scalar> layer;
      layer.w = Matrix::Zero(sizes_[l + 1], sizes_[l]);
      const bool last = l + 2 == sizes_.size();
      if (!last || output_bias_) layer.b = Vector::Zero(sizes_[l + 1]);
      layers_.push_back(std::move(layer));
    }
  }

  // Uniform fan-in initialisation; the output layer is scaled down.
  void InitRandom(uint64_t seed, double output_scale = 1.0) {
    std::mt19937_64 rng(seed);
    for (size_t l = 0; l < layers_.size(); ++l) {
      DenseLayer<Scalar>& layer = layers_[l];
      double bound = std::sqrt(6.0 / (layer.w.cols() + layer.w.rows()));
      if (l + 1 == layers_.size()) bound *= output_scale;
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.w.cols(); ++c) {
          layer.w(r, c) = static_cast<Scalar>(dist(rng));
        }
      }
      if (layer.b.size() > 0) layer.b.setZero();
    }
  }

  const std::vector<int>& sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  bool output_bias() const { return output_bias_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  Layers& layers() { return layers_; }
  const Layers& layers() const { return layers_; }

  size_t NumParams() const {
    size_t n = 0;
    for (const auto& layer : layers_) n += layer.w.size() + layer.b.size();
    return n;
  }

  Matrix Forward(const Matrix& x) const { return Forward(x, nullptr); }

  Matrix Forward(const Matrix& x, Cache* cache) const {
    if (x.rows() != input_dim()) {
      throw std::invalid_argument("Mlp input has " + std::to_string(x.rows()) +
                                  " rows, expected " +
                                  std::to_string(input_dim()));
    }
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    Matrix a = x;
    for (size_t l = 0; l < layers_.size(); ++l) {
      const DenseLayer<Scalar>& layer = layers_[l];
      if (cache) cache->inputs.push_back(a);
      Matrix z = layer.w * a;
      if (layer.b.size() > 0) z.colwise() += layer.b;
      if (l + 1 == layers_.size()) return z;
      if (cache) cache->pre.push_back(z);
      a = Activate(z);
    }
    return a;
  }

  // Accumulates parameter gradients into `grad` (same shapes as layers())
  // given dL/d(output). Writes dL/d(input) when `grad_input` is non-null.
  void Backward(const Cache& cache, const Matrix& grad_output, Layers* grad,
                Matrix* grad_input) const {
    Matrix delta = grad_output;
    for (size_t i = layers_.size(); i-- > 0;) {
      const DenseLayer<Scalar>& layer = layers_[i];
      DenseLayer<Scalar>& g = (*grad)[i];
      g.w.noalias() += delta * cache.inputs[i].transpose();
      if (g.b.size() > 0) g.b += delta.rowwise().sum();
      if (i == 0 && grad_input == nullptr) break;
      Matrix back = layer.w.transpose() * delta;
      if (i == 0) {
        *grad_input = std::move(back);
        break;
      }
      delta = back.cwiseProduct(ActivationDerivative(cache.pre[i - 1]));
    }
  }

  Layers ZeroGradient() const {
    Layers g = layers_;
    for (auto& layer : g) {
      layer.w.setZero();
      layer.b.setZero();
    }
    return g;
  }

  // Parameters in declared layer order: each layer's weights row-major,
  // then its bias.
  std::vector<Scalar> Flatten() const {
    std::vector<Scalar> out;
    out.reserve(NumParams());
    for (const auto& layer : layers_) {
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.w.cols(); ++c) {
          out.push_back(layer.w(r, c));
        }
      }
      for (Eigen::Index r = 0; r < layer.b.size(); ++r) out.push_back(layer.b(r));
    }
    return out;
  }

  void Unflatten(const std::vector<Scalar>& flat) {
    if (flat.size() != NumParams()) {
      throw std::invalid_argument("parameter count mismatch: got " +
                                  std::to_string(flat.size()) + ", expected " +
                                  std::to_string(NumParams()));
    }
    size_t i = 0;
    for (auto& layer : layers_) {
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = flat[i++];
      }
      for (Eigen::Index r = 0; r < layer.b.size(); ++r) layer.b(r) = flat[i++];
    }
  }

  template <typename Other>
  Mlp<Other> Cast() const {
    Mlp<Other> out(sizes_, activation_, output_bias_);
    for (size_t l = 0; l < layers_.size(); ++l) {
      out.layers()[l].w = layers_[l].w.template cast<Other>();
      out.layers()[l].b = layers_[l].b.template cast<Other>();
    }
    return out;
  }

  bool AllFinite() const {
    for (const auto& layer : layers_) {
      if (!layer.w.allFinite() || !layer.b.allFinite()) return false;
    }
    return true;
  }

 private:
  Matrix Activate(const Matrix& z) const {
    if (activation_ == Activation::kTanh) return z.array().tanh().matrix();
    return (z.array() / (Scalar(1) + (-z.array()).exp())).matrix();
  }

  Matrix ActivationDerivative(const Matrix& z) const {
    if (activation_ == Activation::kTanh) {
      return (Scalar(1) - z.array().tanh().square()).matrix();
    }
    const auto s = (Scalar(1) / (Scalar(1) + (-z.array()).exp())).eval();
    return (s * (Scalar(1) + z.array() * (Scalar(1) - s))).matrix();
  }

  std::vector<int> sizes_;
  Activation activation_ = Activation::kTanh;
  bool output_bias_ = true;
  Layers layers_;
};

// Scales the gradient in place so its global L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename Scalar>
double ClipGradientNorm(std::vector<DenseLayer<Scalar>>* grad,
                        double max_norm) {
  double sq = 0.0;
  for (const auto& g : *grad) {
    sq += static_cast<double>(g.w.squaredNorm()) +
          static_cast<double>(g.b.squaredNorm());
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const Scalar scale = static_cast<Scalar>(max_norm / norm);
    for (auto& g : *grad) {
      g.w *= scale;
      g.b *= scale;
    }
  }
  return norm;
}

template <typename Scalar>
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const Mlp<Scalar>& net, double learning_rate,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_ = net.ZeroGradient();
    v_ = net.ZeroGradient();
  }

  void set_learning_rate(double lr) { lr_ = lr; }

  void Step(Mlp<Scalar>* net, const std::vector<DenseLayer<Scalar>>& grad) {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(beta1_);
    const Scalar b2 = static_cast<Scalar>(beta2_);
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(beta1_, t_));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(beta2_, t_));
    const Scalar lr = static_cast<Scalar>(lr_);
    const Scalar eps = static_cast<Scalar>(eps_);
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (size_t l = 0; l < grad.size(); ++l) {
      auto& layer = net->layers()[l];
      update(layer.w, m_[l].w, v_[l].w, grad[l].w);
      if (layer.b.size() > 0) update(layer.b, m_[l].b, v_[l].b, grad[l].b);
    }
  }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  std::vector<DenseLayer<Scalar>> m_, v_;
};

// Heavy-ball gradient descent: v <- mu v - lr g; p <- p + v.
template <typename Scalar>
class MomentumOptimizer {
 public:
  MomentumOptimizer() = default;
  MomentumOptimizer(const Mlp<Scalar>& net, double learning_rate,
                    double momentum)
      : lr_(learning_rate), momentum_(momentum), vel_(net.ZeroGradient()) {}

  void set_learning_rate(double lr) { lr_ = lr; }

  void Step(Mlp<Scalar>* net, const std::vector<DenseLayer<Scalar>>& grad) {
    const Scalar mu = static_cast<Scalar>(momentum_);
    const Scalar lr = static_cast<Scalar>(lr_);
    for (size_t l = 0; l < grad.size(); ++l) {
      auto& layer = net->layers()[l];
      vel_[l].w = mu * vel_[l].w - lr * grad[l].w;
      layer.w += vel_[l].w;
      if (layer.b.size() > 0) {
        vel_[l].b = mu * vel_[l].b - lr * grad[l].b;
        layer.b += vel_[l].b;
      }
    }
  }

 private:
  double lr_ = 1e-2, momentum_ = 0.9;
  std::vector<DenseLayer<Scalar>> vel_;
};

// Flat little-endian float32 weight files.
void WriteFloatBinary(const std::filesystem::path& path,
                      const std::vector<float>& values);
std::vector<float> ReadFloatBinary(const std::filesystem::path& path);

}  // namespace physguide

#endif  // PHYSGUIDE_NN_H_
