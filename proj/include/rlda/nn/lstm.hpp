#pragma once

#include <string>
#include <vector>

#include "rlda/error.hpp"
#include "rlda/nn/tensor.hpp"

namespace rlda::nn {

// Single-layer LSTM returning the last hidden state.
//
// Input rows hold a sequence of `steps` vectors of width `input_dim`, laid
// out step-major, so the whole batch reinterprets as (N*steps) x input_dim.
// Gate order along the 4*units axis is [input, forget, cell, output].
template <typename T>
class Lstm {
 public:
  struct Cache {
    Matrix<T> input;
    std::vector<Matrix<T>> gates;  // per step, N x 4U, post-activation
    std::vector<Matrix<T>> cell;   // per step, N x U (c_t)
    std::vector<Matrix<T>> hidden; // per step, N x U (h_t)
  };

  Lstm() = default;
  Lstm(std::string name, int steps, int input_dim, int units)
      : steps_(steps), d_(input_dim), u_(units), kernel_(name + ".kernel", input_dim, 4 * units),
        recurrent_(name + ".recurrent_kernel", units, 4 * units), bias_(name + ".bias", 1, 4 * units) {}

  void init(Rng& rng) {
    glorot_uniform(kernel_.value, d_, 4 * u_, rng);
    orthogonal_init(recurrent_.value, rng);
    bias_.value.setZero();
    bias_.value.block(0, u_, 1, u_).setOnes();  // forget-gate bias 1
  }

  Eigen::Index in_features() const { return static_cast<Eigen::Index>(steps_) * d_; }
  int units() const { return u_; }

  Matrix<T> forward(const Matrix<T>& x, Cache* cache) const {
    if (x.cols() != in_features()) throw ValueError("lstm input has wrong width");
    const Eigen::Index n = x.rows();
    ConstMatrixMap<T> seq(x.data(), n * steps_, d_);
    Matrix<T> gx = seq * kernel_.value;
    gx.rowwise() += bias_.value.row(0);

    Matrix<T> h = Matrix<T>::Zero(n, u_);
    Matrix<T> c = Matrix<T>::Zero(n, u_);
    Matrix<T> a(n, 4 * u_);
    if (cache) {
      cache->input = x;
      cache->gates.assign(steps_, Matrix<T>());
      cache->cell.assign(steps_, Matrix<T>());
      cache->hidden.assign(steps_, Matrix<T>());
    }
    for (int t = 0; t < steps_; ++t) {
      for (Eigen::Index s = 0; s < n; ++s) a.row(s) = gx.row(s * steps_ + t);
      a.noalias() += h * recurrent_.value;
      activate(a);
      c = a.middleCols(u_, u_).cwiseProduct(c) + a.leftCols(u_).cwiseProduct(a.middleCols(2 * u_, u_));
      h = a.rightCols(u_).cwiseProduct(c.array().tanh().matrix());
      if (cache) {
        cache->gates[t] = a;
        cache->cell[t] = c;
        cache->hidden[t] = h;
      }
    }
    return h;
  }

  // dy: gradient w.r.t. the last hidden state (N x U).
  Matrix<T> backward(const Cache& cache, const Matrix<T>& dy, bool need_input_grad) {
    const Eigen::Index n = dy.rows();
    Matrix<T> dgx(n * steps_, 4 * u_);
    Matrix<T> dh = dy;
    Matrix<T> dc = Matrix<T>::Zero(n, u_);
    Matrix<T> da(n, 4 * u_);
    const Matrix<T> zeros = Matrix<T>::Zero(n, u_);
    for (int t = steps_ - 1; t >= 0; --t) {
      const Matrix<T>& g = cache.gates[t];
      const Matrix<T>& c_prev = t > 0 ? cache.cell[t - 1] : zeros;
      const Matrix<T>& h_prev = t > 0 ? cache.hidden[t - 1] : zeros;
      const auto i = g.leftCols(u_).array();
      const auto f = g.middleCols(u_, u_).array();
      const auto gc = g.middleCols(2 * u_, u_).array();
      const auto o = g.rightCols(u_).array();
      const Matrix<T> tanh_c = cache.cell[t].array().tanh().matrix();

      dc.array() += dh.array() * o * (T(1) - tanh_c.array().square());
      da.leftCols(u_) = (dc.array() * gc * i * (T(1) - i)).matrix();
      da.middleCols(u_, u_) = (dc.array() * c_prev.array() * f * (T(1) - f)).matrix();
      da.middleCols(2 * u_, u_) = (dc.array() * i * (T(1) - gc.square())).matrix();
      da.rightCols(u_) = (dh.array() * tanh_c.array() * o * (T(1) - o)).matrix();

      for (Eigen::Index s = 0; s < n; ++s) dgx.row(s * steps_ + t) = da.row(s);
      recurrent_.grad.noalias() += h_prev.transpose() * da;
      dh.noalias() = da * recurrent_.value.transpose();
      dc = (dc.array() * f).matrix();
    }
    ConstMatrixMap<T> seq(cache.input.data(), n * steps_, d_);
    kernel_.grad.noalias() += seq.transpose() * dgx;
    bias_.grad += dgx.colwise().sum();
    Matrix<T> dx;
    if (need_input_grad) {
      dx.resize(n, in_features());
      MatrixMap<T> dxm(dx.data(), n * steps_, d_);
      dxm.noalias() = dgx * kernel_.value.transpose();
    }
    return dx;
  }

  Param<T>& kernel() { return kernel_; }
  Param<T>& recurrent_kernel() { return recurrent_; }
  Param<T>& bias() { return bias_; }

 private:
  void activate(Matrix<T>& a) const {
    a.leftCols(2 * u_) = a.leftCols(2 * u_).unaryExpr([](T v) { return sigmoid(v); });
    a.middleCols(2 * u_, u_) = a.middleCols(2 * u_, u_).array().tanh().matrix();
    a.rightCols(u_) = a.rightCols(u_).unaryExpr([](T v) { return sigmoid(v); });
  }

  int steps_ = 1, d_ = 1, u_ = 1;
  Param<T> kernel_, recurrent_, bias_;
};

}  // namespace rlda::nn
