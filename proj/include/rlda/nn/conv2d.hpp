#pragma once

#include <algorithm>
#include <string>

#include "rlda/error.hpp"
#include "rlda/nn/tensor.hpp"

namespace rlda::nn {

// 2-D convolution, stride 1, 'same' zero padding, optional ReLU.
//
// Activations are rows of an N x (H*W*C) matrix; inside a row the layout is
// (h, w, c) with channels fastest. The kernel is stored as (k*k*Cin) x Cout
// in (dh, dw, cin) row order so the forward pass is im2col + one GEMM per
// sample.
template <typename T>
class Conv2D {
 public:
  struct Cache {
    Matrix<T> input;
    Matrix<T> output;  // post-activation
  };

  Conv2D() = default;
  Conv2D(std::string name, int height, int width, int in_channels, int out_channels, int kernel, bool relu)
      : h_(height), w_(width), cin_(in_channels), cout_(out_channels), k_(kernel), relu_(relu),
        weight_(name + ".kernel", kernel * kernel * in_channels, out_channels),
        bias_(name + ".bias", 1, out_channels) {
    if (kernel % 2 == 0) throw ValueError("same-padded convolution needs an odd kernel");
  }

  void init(Rng& rng) {
    he_uniform(weight_.value, static_cast<Eigen::Index>(k_) * k_ * cin_, rng);
    bias_.value.setZero();
  }

  Eigen::Index in_features() const { return static_cast<Eigen::Index>(h_) * w_ * cin_; }
  Eigen::Index out_features() const { return static_cast<Eigen::Index>(h_) * w_ * cout_; }

  Matrix<T> forward(const Matrix<T>& x, Cache* cache) const {
    if (x.cols() != in_features()) throw ValueError("conv input has wrong width");
    const Eigen::Index n = x.rows();
    Matrix<T> y(n, out_features());
    Matrix<T> col;
    for (Eigen::Index s0 = 0; s0 < n; s0 += kChunk) {
      const Eigen::Index m = std::min(kChunk, n - s0);
      im2col(x, s0, m, col);
      MatrixMap<T> ys(y.row(s0).data(), m * positions(), cout_);
      ys.noalias() = col * weight_.value;
      ys.rowwise() += bias_.value.row(0);
      if (relu_) ys = ys.cwiseMax(T(0));
    }
    if (cache) {
      cache->input = x;
      cache->output = y;
    }
    return y;
  }

  // Accumulates parameter gradients; returns dL/dx when requested.
  Matrix<T> backward(const Cache& cache, const Matrix<T>& dy, bool need_input_grad) {
    const Eigen::Index n = dy.rows();
    Matrix<T> dx;
    if (need_input_grad) dx = Matrix<T>::Zero(n, in_features());
    Matrix<T> col, dcol, d;
    for (Eigen::Index s0 = 0; s0 < n; s0 += kChunk) {
      const Eigen::Index m = std::min(kChunk, n - s0);
      ConstMatrixMap<T> dys(dy.row(s0).data(), m * positions(), cout_);
      if (relu_) {
        ConstMatrixMap<T> ys(cache.output.row(s0).data(), m * positions(), cout_);
        d = (ys.array() > T(0)).select(dys, T(0));
      } else {
        d = dys;
      }
      im2col(cache.input, s0, m, col);
      weight_.grad.noalias() += col.transpose() * d;
      bias_.grad += d.colwise().sum();
      if (need_input_grad) {
        dcol.noalias() = d * weight_.value.transpose();
        for (Eigen::Index s = 0; s < m; ++s) col2im(dcol.data() + s * positions() * patch(), dx.row(s0 + s).data());
      }
    }
    return dx;
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  const Param<T>& weight() const { return weight_; }
  const Param<T>& bias() const { return bias_; }

 private:
  static constexpr Eigen::Index kChunk = 1;

  Eigen::Index positions() const { return static_cast<Eigen::Index>(h_) * w_; }
  Eigen::Index patch() const { return static_cast<Eigen::Index>(k_) * k_ * cin_; }

  // Patches of samples [s0, s0+m) stacked as (m*H*W) x (k*k*Cin).
  void im2col(const Matrix<T>& x, Eigen::Index s0, Eigen::Index m, Matrix<T>& col) const {
    const int pad = k_ / 2;
    const Eigen::Index kk = patch();
    col.setZero(m * positions(), kk);
    for (Eigen::Index s = 0; s < m; ++s) {
      const T* in = x.row(s0 + s).data();
      T* base = col.data() + s * positions() * kk;
      for (int y = 0; y < h_; ++y) {
        for (int dy = 0; dy < k_; ++dy) {
          const int iy = y + dy - pad;
          if (iy < 0 || iy >= h_) continue;
          for (int dx = 0; dx < k_; ++dx) {
            const int x0 = std::max(0, pad - dx), x1 = std::min(w_, w_ + pad - dx);
            const T* src = in + (static_cast<std::ptrdiff_t>(iy) * w_ + x0 + dx - pad) * cin_;
            T* dst = base + (static_cast<std::ptrdiff_t>(y) * w_ + x0) * kk + (dy * k_ + dx) * cin_;
            for (int x = x0; x < x1; ++x, src += cin_, dst += kk)
              for (int c = 0; c < cin_; ++c) dst[c] = src[c];
          }
        }
      }
    }
  }

  void col2im(const T* dcol, T* dx) const {
    const int pad = k_ / 2;
    const Eigen::Index kk = patch();
    for (int y = 0; y < h_; ++y) {
      for (int dy = 0; dy < k_; ++dy) {
        const int iy = y + dy - pad;
        if (iy < 0 || iy >= h_) continue;
        for (int dx_ = 0; dx_ < k_; ++dx_) {
          const int x0 = std::max(0, pad - dx_), x1 = std::min(w_, w_ + pad - dx_);
          T* out = dx + (static_cast<std::ptrdiff_t>(iy) * w_ + x0 + dx_ - pad) * cin_;
          const T* src = dcol + (static_cast<std::ptrdiff_t>(y) * w_ + x0) * kk + (dy * k_ + dx_) * cin_;
          for (int x = x0; x < x1; ++x, out += cin_, src += kk)
            for (int c = 0; c < cin_; ++c) out[c] += src[c];
        }
      }
    }
  }

  int h_ = 0, w_ = 0, cin_ = 0, cout_ = 0, k_ = 1;
  bool relu_ = true;
  Param<T> weight_;
  Param<T> bias_;
};

}  // namespace rlda::nn
