#pragma once

#include <random>
#include <string>

#include "rlda/error.hpp"
#include "rlda/nn/tensor.hpp"

namespace rlda::nn {

template <typename T>
class Dense {
 public:
  struct Cache {
    Matrix<T> input;
    Matrix<T> output;
  };

  Dense() = default;
  Dense(std::string name, int in, int out, bool relu)
      : in_(in), out_(out), relu_(relu), weight_(name + ".kernel", in, out), bias_(name + ".bias", 1, out) {}

  void init(Rng& rng) {
    he_uniform(weight_.value, in_, rng);
    bias_.value.setZero();
  }

  Matrix<T> forward(const Matrix<T>& x, Cache* cache) const {
    if (x.cols() != in_) throw ValueError("dense input has wrong width");
    Matrix<T> y = x * weight_.value;
    y.rowwise() += bias_.value.row(0);
    if (relu_) y = y.cwiseMax(T(0));
    if (cache) {
      cache->input = x;
      cache->output = y;
    }
    return y;
  }

  Matrix<T> backward(const Cache& cache, const Matrix<T>& dy, bool need_input_grad) {
    Matrix<T> d = relu_ ? Matrix<T>((cache.output.array() > T(0)).select(dy, T(0))) : dy;
    weight_.grad.noalias() += cache.input.transpose() * d;
    bias_.grad += d.colwise().sum();
    if (!need_input_grad) return {};
    return d * weight_.value.transpose();
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  const Param<T>& weight() const { return weight_; }
  const Param<T>& bias() const { return bias_; }

 private:
  int in_ = 1, out_ = 1;
  bool relu_ = false;
  Param<T> weight_, bias_;
};

// Inverted dropout: kept units are scaled by 1/(1-rate) at train time so
// eval mode is the identity.
template <typename T>
class Dropout {
 public:
  struct Cache {
    Matrix<T> mask;  // 0 or 1/(1-rate)
  };

  Dropout() = default;
  explicit Dropout(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0) throw ValueError("dropout rate must be in [0, 1)");
  }

  Matrix<T> forward(const Matrix<T>& x, bool training, Rng& rng, Cache* cache) const {
    if (!training || rate_ == 0.0) {
      if (cache) cache->mask = Matrix<T>::Ones(x.rows(), x.cols());
      return x;
    }
    std::bernoulli_distribution keep(1.0 - rate_);
    const T scale = static_cast<T>(1.0 / (1.0 - rate_));
    Matrix<T> mask(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : T(0);
    Matrix<T> y = x.cwiseProduct(mask);
    if (cache) cache->mask = std::move(mask);
    return y;
  }

  Matrix<T> backward(const Cache& cache, const Matrix<T>& dy) const { return dy.cwiseProduct(cache.mask); }

  double rate() const { return rate_; }

 private:
  double rate_ = 0.0;
};

}  // namespace rlda::nn
