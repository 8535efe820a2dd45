#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rlda::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MatrixMap = Eigen::Map<Matrix<T>>;

template <typename T>
using ConstMatrixMap = Eigen::Map<const Matrix<T>>;

using Rng = std::mt19937_64;

// A named parameter tensor. Vectors are stored as 1 x n. Non-trainable
// entries (batch-norm running statistics) have no gradient and are skipped
// by the optimizer but still persisted.
template <typename T>
struct Param {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols, bool train = true)
      : name(std::move(n)), value(Matrix<T>::Zero(rows, cols)), grad(Matrix<T>::Zero(rows, cols)),
        trainable(train) {}

  void zero_grad() { grad.setZero(); }
};

template <typename T>
void uniform_init(Matrix<T>& m, double limit, Rng& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(u(rng));
}

// He-uniform: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
template <typename T>
void he_uniform(Matrix<T>& m, Eigen::Index fan_in, Rng& rng) {
  uniform_init(m, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
}

template <typename T>
void glorot_uniform(Matrix<T>& m, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  uniform_init(m, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

// rows x cols matrix with orthonormal rows (rows <= cols) or columns.
template <typename T>
void orthogonal_init(Matrix<T>& m, Rng& rng) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  const bool wide = rows < cols;
  const Eigen::Index big = wide ? cols : rows, small = wide ? rows : cols;
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(big, small);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign-fix so the decomposition is unique (as in the usual orthogonal initializer).
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < small; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  if (wide)
    m = q.transpose().cast<T>();
  else
    m = q.cast<T>();
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace rlda::nn
