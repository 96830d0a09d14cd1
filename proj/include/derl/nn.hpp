#pragma once

// Dense feedforward networks with exact reverse-mode gradients and Adam.
//
// Batches are stored column-major: each column of an input matrix is one
// sample. Hidden layers share one activation, the output layer is linear;
// policy heads apply softmax() on top of the raw outputs.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "derl/errors.hpp"

namespace derl {

enum class Activation { Tanh, ReLU };

inline std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// One tensor per weight matrix and bias vector, shaped like a DenseNet's
/// parameters. Used for the parameters themselves, their gradients and the
/// Adam moments.
template <typename Scalar>
struct ParamSet {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;

  static ParamSet zeros_like(const ParamSet& other) {
    ParamSet out;
    for (const auto& w : other.weights) out.weights.push_back(MatrixX<Scalar>::Zero(w.rows(), w.cols()));
    for (const auto& b : other.biases) out.biases.push_back(VectorX<Scalar>::Zero(b.size()));
    return out;
  }

  Scalar squared_norm() const {
    Scalar s = 0;
    for (const auto& w : weights) s += w.squaredNorm();
    for (const auto& b : biases) s += b.squaredNorm();
    return s;
  }

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
    return n;
  }

  // Flat coordinate access, weights first (layer order, column-major), then biases.
  Scalar& coeff(std::size_t i) {
    for (auto& w : weights) {
      if (i < static_cast<std::size_t>(w.size())) return w.data()[i];
      i -= static_cast<std::size_t>(w.size());
    }
    for (auto& b : biases) {
      if (i < static_cast<std::size_t>(b.size())) return b.data()[i];
      i -= static_cast<std::size_t>(b.size());
    }
    throw UsageError("ParamSet::coeff index out of range");
  }
  Scalar coeff(std::size_t i) const { return const_cast<ParamSet*>(this)->coeff(i); }

  ParamSet& operator*=(Scalar s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
    return *this;
  }

  ParamSet& operator+=(const ParamSet& o) {
    for (std::size_t l = 0; l < weights.size(); ++l) weights[l] += o.weights[l];
    for (std::size_t l = 0; l < biases.size(); ++l) biases[l] += o.biases[l];
    return *this;
  }

  bool same_shape(const ParamSet& o) const {
    if (weights.size() != o.weights.size() || biases.size() != o.biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (weights[l].rows() != o.weights[l].rows() || weights[l].cols() != o.weights[l].cols()) return false;
    for (std::size_t l = 0; l < biases.size(); ++l)
      if (biases[l].size() != o.biases[l].size()) return false;
    return true;
  }

  bool operator==(const ParamSet& o) const {
    if (!same_shape(o)) return false;
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (weights[l] != o.weights[l]) return false;
    for (std::size_t l = 0; l < biases.size(); ++l)
      if (biases[l] != o.biases[l]) return false;
    return true;
  }
};

/// Scales every set so that their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <typename Scalar>
Scalar clip_global_norm(std::initializer_list<ParamSet<Scalar>*> sets, Scalar max_norm) {
  if (!(max_norm > 0)) throw ConfigError("clip_global_norm: max_norm must be positive");
  Scalar sq = 0;
  for (const auto* s : sets) sq += s->squared_norm();
  const Scalar norm = std::sqrt(sq);
  if (norm > max_norm) {
    const Scalar scale = max_norm / norm;
    for (auto* s : sets) *s *= scale;
  }
  return norm;
}

template <typename Scalar>
Scalar clip_global_norm(ParamSet<Scalar>& grads, Scalar max_norm) {
  return clip_global_norm<Scalar>({&grads}, max_norm);
}

template <typename Scalar>
class DenseNet {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  using Params = ParamSet<Scalar>;

  struct AdamConfig {
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
  };

  /// Intermediate values of one batched forward pass, consumed by backward().
  struct Tape {
    Matrix input;
    std::vector<Matrix> pre;   // pre-activation per layer
    std::vector<Matrix> post;  // post-activation per layer (last = output)
  };

  DenseNet() = default;

  DenseNet(std::vector<int> layer_sizes, Activation hidden, std::uint64_t seed)
      : sizes_(std::move(layer_sizes)), activation_(hidden) {
    if (sizes_.size() < 2) throw ConfigError("DenseNet needs at least input and output sizes");
    for (int s : sizes_)
      if (s <= 0) throw ConfigError("DenseNet layer sizes must be positive");
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int fan_in = sizes_[l];
      const Scalar bound = std::sqrt(Scalar(1) / Scalar(fan_in));
      std::uniform_real_distribution<double> dist(-double(bound), double(bound));
      Matrix w(sizes_[l + 1], fan_in);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = Scalar(dist(rng));
      Vector b(sizes_[l + 1]);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = Scalar(dist(rng));
      params_.weights.push_back(std::move(w));
      params_.biases.push_back(std::move(b));
    }
    m_ = Params::zeros_like(params_);
    v_ = Params::zeros_like(params_);
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t num_layers() const { return params_.weights.size(); }

  Params& parameters() { return params_; }
  const Params& parameters() const { return params_; }
  const Params& first_moment() const { return m_; }
  const Params& second_moment() const { return v_; }
  std::int64_t step_count() const { return steps_; }

  Vector forward(const Vector& x) const {
    if (x.size() != input_size()) throw ConfigError(shape_message("forward", x.size()));
    Vector h = x;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      h = params_.weights[l] * h + params_.biases[l];
      if (is_hidden(l)) h = activate(h);
    }
    return h;
  }

  Matrix forward_batch(const Matrix& x) const {
    if (x.rows() != input_size()) throw ConfigError(shape_message("forward_batch", x.rows()));
    Matrix h = x;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      Matrix z = (params_.weights[l] * h).colwise() + params_.biases[l];
      h = is_hidden(l) ? activate(z) : std::move(z);
    }
    return h;
  }

  Matrix forward_batch(const Matrix& x, Tape& tape) const {
    if (x.rows() != input_size()) throw ConfigError(shape_message("forward_batch", x.rows()));
    tape.input = x;
    tape.pre.clear();
    tape.post.clear();
    const Matrix* h = &tape.input;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      tape.pre.push_back((params_.weights[l] * *h).colwise() + params_.biases[l]);
      tape.post.push_back(is_hidden(l) ? activate(tape.pre.back()) : tape.pre.back());
      h = &tape.post.back();
    }
    return tape.post.back();
  }

  /// Gradient of sum(upstream .* output) with respect to every parameter.
  /// When input_grad is given it receives the gradient with respect to the
  /// tape's input batch.
  Params backward(const Tape& tape, const Matrix& upstream, Matrix* input_grad = nullptr) const {
    if (tape.post.size() != num_layers()) throw ConfigError("backward: tape does not match network");
    if (upstream.rows() != output_size() || upstream.cols() != tape.input.cols())
      throw ConfigError("backward: upstream gradient shape mismatch");
    Params grads;
    grads.weights.resize(num_layers());
    grads.biases.resize(num_layers());
    Matrix delta = upstream;
    for (std::size_t l = num_layers(); l-- > 0;) {
      if (is_hidden(l)) delta = delta.cwiseProduct(activation_derivative(tape.pre[l], tape.post[l]));
      const Matrix& layer_in = l == 0 ? tape.input : tape.post[l - 1];
      grads.weights[l].noalias() = delta * layer_in.transpose();
      grads.biases[l] = delta.rowwise().sum();
      if (l > 0 || input_grad != nullptr) {
        Matrix next = params_.weights[l].transpose() * delta;
        delta = std::move(next);
      }
    }
    if (input_grad != nullptr) *input_grad = std::move(delta);
    return grads;
  }

  /// One Adam step with bias correction; eps is added after the square root.
  void adam_step(const Params& grads, Scalar learning_rate, Scalar eps, AdamConfig cfg = {}) {
    if (!grads.same_shape(params_)) throw ConfigError("adam_step: gradient shapes do not match parameters");
    if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient component");
    ++steps_;
    const Scalar c1 = Scalar(1) - std::pow(cfg.beta1, Scalar(steps_));
    const Scalar c2 = Scalar(1) - std::pow(cfg.beta2, Scalar(steps_));
    auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
      m = cfg.beta1 * m + (Scalar(1) - cfg.beta1) * g;
      v = cfg.beta2 * v + (Scalar(1) - cfg.beta2) * g.cwiseProduct(g);
      p.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < num_layers(); ++l) {
      update(params_.weights[l], m_.weights[l], v_.weights[l], grads.weights[l]);
      update(params_.biases[l], m_.biases[l], v_.biases[l], grads.biases[l]);
    }
  }

  /// Copies parameters only; optimizer state is left untouched.
  void copy_parameters_from(const DenseNet& other) {
    if (!other.params_.same_shape(params_)) throw ConfigError("copy_parameters_from: shape mismatch");
    params_ = other.params_;
  }

  /// Polyak averaging: this <- tau * other + (1 - tau) * this.
  void soft_update_from(const DenseNet& other, Scalar tau) {
    if (!other.params_.same_shape(params_)) throw ConfigError("soft_update_from: shape mismatch");
    for (std::size_t l = 0; l < num_layers(); ++l) {
      params_.weights[l] = tau * other.params_.weights[l] + (Scalar(1) - tau) * params_.weights[l];
      params_.biases[l] = tau * other.params_.biases[l] + (Scalar(1) - tau) * params_.biases[l];
    }
  }

 private:
  bool is_hidden(std::size_t layer) const { return layer + 1 < num_layers(); }

  template <typename Derived>
  Matrix activate(const Eigen::MatrixBase<Derived>& z) const {
    if (activation_ == Activation::Tanh) return z.array().tanh().matrix();
    return z.cwiseMax(Scalar(0));
  }

  Matrix activation_derivative(const Matrix& pre, const Matrix& post) const {
    if (activation_ == Activation::Tanh) return (Scalar(1) - post.array().square()).matrix();
    return (pre.array() > Scalar(0)).template cast<Scalar>().matrix();
  }

  std::string shape_message(const char* where, Eigen::Index got) const {
    return std::string(where) + ": expected input of size " + std::to_string(input_size()) + ", got " +
           std::to_string(got);
  }

  std::vector<int> sizes_;
  Activation activation_ = Activation::Tanh;
  Params params_;
  Params m_;
  Params v_;
  std::int64_t steps_ = 0;
};

using Net = DenseNet<double>;
using Grads = ParamSet<double>;
using Mat = MatrixX<double>;
using Vec = VectorX<double>;

// ---------------------------------------------------------------------------
// Categorical distributions over a discrete action set.

/// Max-subtracted softmax.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Columnwise softmax of a logits batch.
template <typename Scalar>
MatrixX<Scalar> softmax_columns(const MatrixX<Scalar>& logits) {
  MatrixX<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) out.col(j) = softmax(logits.col(j));
  return out;
}

template <typename Scalar>
struct Categorical {
  VectorX<Scalar> probs;

  static Categorical from_logits(const VectorX<Scalar>& logits) { return {softmax(logits)}; }
  Eigen::Index size() const { return probs.size(); }
  bool valid(Scalar tol = Scalar(1e-9)) const {
    return (probs.array() >= Scalar(0)).all() && std::abs(probs.sum() - Scalar(1)) <= tol;
  }
};

template <typename Scalar>
Categorical<Scalar> softmax_categorical(const VectorX<Scalar>& logits) {
  return Categorical<Scalar>::from_logits(logits);
}

/// -sum p log p with 0 log 0 = 0.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& probs) {
  using Scalar = typename Derived::Scalar;
  Scalar h = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (probs(i) > Scalar(0)) h -= probs(i) * std::log(probs(i));
  return h;
}

template <typename Scalar>
Scalar entropy(const Categorical<Scalar>& d) {
  return entropy(d.probs);
}

/// Index of the largest score; ties go to the lowest index.
template <typename Derived>
int argmax(const Eigen::MatrixBase<Derived>& scores) {
  int best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores(i) > scores(best)) best = static_cast<int>(i);
  return best;
}

}  // namespace derl
