#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rlda/error.hpp"
#include "rlda/nn/tensor.hpp"

namespace rlda::nn {

// Per-channel batch normalization over (N, H, W). The input row layout has
// channels fastest, so the batch reinterprets as an (N*H*W) x C matrix.
template <typename T>
class BatchNorm {
 public:
  struct Cache {
    Matrix<T> xhat;  // (N*H*W) x C
    Matrix<T> inv_std;  // 1 x C
    bool used_batch_stats = true;
  };

  BatchNorm() = default;
  BatchNorm(std::string name, int channels, double momentum = 0.99, double epsilon = 1e-3)
      : c_(channels), momentum_(momentum), eps_(epsilon), gamma_(name + ".gamma", 1, channels),
        beta_(name + ".beta", 1, channels), mean_(name + ".moving_mean", 1, channels, false),
        var_(name + ".moving_variance", 1, channels, false) {}

  void init() {
    gamma_.value.setOnes();
    beta_.value.setZero();
    mean_.value.setZero();
    var_.value.setOnes();
  }

  // training=true normalizes with batch statistics and updates the running
  // averages, unless the layer is frozen; then (and in eval) running stats are used.
  Matrix<T> forward(const Matrix<T>& x, bool training, Cache* cache) {
    if (x.cols() % c_ != 0) throw ValueError("batch-norm input width is not a multiple of channels");
    const Eigen::Index rows = x.size() / c_;
    const bool batch_stats = training && !frozen_;
    std::vector<T> mean(static_cast<std::size_t>(c_)), inv_std(static_cast<std::size_t>(c_));
    if (batch_stats) {
      std::vector<double> sum(static_cast<std::size_t>(c_), 0.0), sq(static_cast<std::size_t>(c_), 0.0);
      const T* px = x.data();
      for (Eigen::Index r = 0; r < rows; ++r, px += c_)
        for (int c = 0; c < c_; ++c) sum[c] += px[c];
      for (int c = 0; c < c_; ++c) sum[c] /= static_cast<double>(rows);
      px = x.data();
      for (Eigen::Index r = 0; r < rows; ++r, px += c_)
        for (int c = 0; c < c_; ++c) {
          const double d = px[c] - sum[c];
          sq[c] += d * d;
        }
      const double unbias = rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1) : 1.0;
      for (int c = 0; c < c_; ++c) {
        const double var = sq[c] / static_cast<double>(rows);
        mean[c] = static_cast<T>(sum[c]);
        inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + eps_));
        mean_.value(0, c) = static_cast<T>(momentum_ * mean_.value(0, c) + (1.0 - momentum_) * sum[c]);
        var_.value(0, c) = static_cast<T>(momentum_ * var_.value(0, c) + (1.0 - momentum_) * var * unbias);
      }
    } else {
      for (int c = 0; c < c_; ++c) {
        mean[c] = mean_.value(0, c);
        inv_std[c] = T(1) / std::sqrt(var_.value(0, c) + static_cast<T>(eps_));
      }
    }
    Matrix<T> y(x.rows(), x.cols());
    T* xhat = nullptr;
    if (cache) {
      cache->xhat.resize(rows, c_);
      xhat = cache->xhat.data();
      cache->inv_std = Eigen::Map<const Matrix<T>>(inv_std.data(), 1, c_);
      cache->used_batch_stats = batch_stats;
    }
    const T* px = x.data();
    T* py = y.data();
    const T* g = gamma_.value.data();
    const T* b = beta_.value.data();
    for (Eigen::Index r = 0; r < rows; ++r, px += c_, py += c_) {
      for (int c = 0; c < c_; ++c) {
        const T h = (px[c] - mean[c]) * inv_std[c];
        py[c] = h * g[c] + b[c];
        if (xhat) xhat[r * c_ + c] = h;
      }
    }
    return y;
  }

  // Same as forward(x, false, nullptr) without touching any state.
  Matrix<T> infer(const Matrix<T>& x) const {
    if (x.cols() % c_ != 0) throw ValueError("batch-norm input width is not a multiple of channels");
    const Eigen::Index rows = x.size() / c_;
    std::vector<T> scale(static_cast<std::size_t>(c_)), shift(static_cast<std::size_t>(c_));
    for (int c = 0; c < c_; ++c) {
      const T inv_std = T(1) / std::sqrt(var_.value(0, c) + static_cast<T>(eps_));
      scale[c] = inv_std * gamma_.value(0, c);
      shift[c] = beta_.value(0, c) - mean_.value(0, c) * scale[c];
    }
    Matrix<T> y(x.rows(), x.cols());
    const T* px = x.data();
    T* py = y.data();
    for (Eigen::Index r = 0; r < rows; ++r, px += c_, py += c_)
      for (int c = 0; c < c_; ++c) py[c] = px[c] * scale[c] + shift[c];
    return y;
  }

  Matrix<T> backward(const Cache& cache, const Matrix<T>& dy) {
    const Eigen::Index rows = dy.size() / c_;
    std::vector<double> sum_dy(static_cast<std::size_t>(c_), 0.0), sum_dy_xhat(static_cast<std::size_t>(c_), 0.0);
    const T* pd = dy.data();
    const T* ph = cache.xhat.data();
    for (Eigen::Index r = 0; r < rows; ++r, pd += c_, ph += c_)
      for (int c = 0; c < c_; ++c) {
        sum_dy[c] += pd[c];
        sum_dy_xhat[c] += pd[c] * ph[c];
      }
    for (int c = 0; c < c_; ++c) {
      gamma_.grad(0, c) += static_cast<T>(sum_dy_xhat[c]);
      beta_.grad(0, c) += static_cast<T>(sum_dy[c]);
    }
    Matrix<T> dx(dy.rows(), dy.cols());
    std::vector<T> a(static_cast<std::size_t>(c_)), b(static_cast<std::size_t>(c_)), k(static_cast<std::size_t>(c_));
    const double m = static_cast<double>(rows);
    for (int c = 0; c < c_; ++c) {
      const double scale = static_cast<double>(gamma_.value(0, c)) * cache.inv_std(0, c);
      a[c] = static_cast<T>(scale);
      // dx = scale * (dy - mean(dy) - xhat * mean(dy * xhat)) with batch statistics
      b[c] = cache.used_batch_stats ? static_cast<T>(scale * sum_dy[c] / m) : T(0);
      k[c] = cache.used_batch_stats ? static_cast<T>(scale * sum_dy_xhat[c] / m) : T(0);
    }
    pd = dy.data();
    ph = cache.xhat.data();
    T* px = dx.data();
    for (Eigen::Index r = 0; r < rows; ++r, pd += c_, ph += c_, px += c_)
      for (int c = 0; c < c_; ++c) px[c] = a[c] * pd[c] - b[c] - ph[c] * k[c];
    return dx;
  }

  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  Param<T>& moving_mean() { return mean_; }
  Param<T>& moving_variance() { return var_; }

 private:
  int c_ = 1;
  double momentum_ = 0.99;
  double eps_ = 1e-3;
  bool frozen_ = false;
  Param<T> gamma_, beta_, mean_, var_;
};

}  // namespace rlda::nn
