#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rlda/error.hpp"
#include "rlda/nn/tensor.hpp"

namespace rlda::nn {

struct AdamConfig {
  double learning_rate = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Adam with bias correction. Moment tensors are created lazily on the first
// step, mirroring the shapes (and order) of the parameters passed in.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return step_; }

  // Checks every gradient first so a NaN leaves all parameters untouched.
  void step(const std::vector<Param<T>*>& params) {
    for (const auto* p : params) {
      if (!p->trainable) continue;
      if (!p->grad.allFinite())
        throw DivergenceError("non-finite gradient in parameter '" + p->name + "' at optimizer step " +
                              std::to_string(step_ + 1));
    }
    if (m_.empty()) {
      for (const auto* p : params) {
        if (!p->trainable) continue;
        m_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
        names_.push_back(p->name);
      }
    }
    ++step_;
    const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T lr = static_cast<T>(cfg_.learning_rate);
    const T eps = static_cast<T>(cfg_.epsilon);
    std::size_t i = 0;
    for (auto* p : params) {
      if (!p->trainable) continue;
      if (i >= m_.size() || names_[i] != p->name || m_[i].rows() != p->value.rows() ||
          m_[i].cols() != p->value.cols())
        throw ValueError("optimizer state does not match parameter '" + p->name + "'");
      m_[i] = b1 * m_[i] + (T(1) - b1) * p->grad;
      v_[i] = b2 * v_[i] + (T(1) - b2) * p->grad.cwiseAbs2();
      const auto m_hat = m_[i].array() / static_cast<T>(b1t);
      const auto v_hat = v_[i].array() / static_cast<T>(b2t);
      p->value.array() -= lr * m_hat / (v_hat.sqrt() + eps);
      ++i;
    }
  }

  // Raw state access for checkpointing.
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Matrix<T>>& first_moments() const { return m_; }
  const std::vector<Matrix<T>>& second_moments() const { return v_; }

  void restore(std::int64_t step, std::vector<std::string> names, std::vector<Matrix<T>> m, std::vector<Matrix<T>> v) {
    if (names.size() != m.size() || m.size() != v.size()) throw ValueError("inconsistent optimizer state");
    step_ = step;
    names_ = std::move(names);
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<std::string> names_;
  std::vector<Matrix<T>> m_, v_;
};

}  // namespace rlda::nn
