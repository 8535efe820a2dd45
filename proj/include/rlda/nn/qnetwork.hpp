#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rlda/dsp/mfcc.hpp"
#include "rlda/error.hpp"
#include "rlda/nn/architecture.hpp"
#include "rlda/nn/batch_norm.hpp"
#include "rlda/nn/conv2d.hpp"
#include "rlda/nn/dense.hpp"
#include "rlda/nn/lstm.hpp"
#include "rlda/nn/tensor.hpp"

namespace rlda::nn {

enum class Mode { Train, Eval };

// Conv(5, ReLU) -> BatchNorm -> Conv(3, ReLU) -> per-time-step flatten ->
// LSTM -> Dense(ReLU) -> Dropout -> Dense(linear). The output head is
// linear: its outputs are Q-values, one per emotion.
//
// Input rows are time-major (t, f): the time axis of the conv stack becomes
// the LSTM sequence, each step carrying all frequency rows x channels.
template <typename T>
class QNetwork {
 public:
  struct Cache {
    typename Conv2D<T>::Cache conv1;
    typename BatchNorm<T>::Cache bn1;
    typename Conv2D<T>::Cache conv2;
    typename Lstm<T>::Cache lstm;
    typename Dense<T>::Cache dense1;
    typename Dropout<T>::Cache dropout;
    typename Dense<T>::Cache dense2;
    bool valid = false;
  };

  explicit QNetwork(const Architecture& arch = {}, std::uint64_t seed = 0) : arch_(arch), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ull) {
    arch_.validate();
    const int h = arch.input_time, w = arch.input_freq;
    conv1_ = Conv2D<T>("conv1", h, w, 1, arch.conv1_filters, arch.conv1_kernel, true);
    bn1_ = BatchNorm<T>("bn1", arch.conv1_filters);
    conv2_ = Conv2D<T>("conv2", h, w, arch.conv1_filters, arch.conv2_filters, arch.conv2_kernel, true);
    lstm_ = Lstm<T>("lstm", h, arch.lstm_input_dim(), arch.lstm_units);
    dense1_ = Dense<T>("dense1", arch.lstm_units, arch.dense_units, true);
    dropout_ = Dropout<T>(arch.dropout);
    dense2_ = Dense<T>("dense2", arch.dense_units, arch.actions, false);
    Rng rng(seed);
    conv1_.init(rng);
    bn1_.init();
    conv2_.init(rng);
    lstm_.init(rng);
    dense1_.init(rng);
    dense2_.init(rng);
  }

  const Architecture& architecture() const { return arch_; }
  Eigen::Index input_width() const { return static_cast<Eigen::Index>(arch_.input_freq) * arch_.input_time; }

  void set_mode(Mode m) { mode_ = m; }
  void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed ^ 0x9e3779b97f4a7c15ull); }
  Mode mode() const { return mode_; }

  // Freezes batch-norm statistics: running averages are used (and not
  // updated) even in train mode.
  void set_batch_norm_frozen(bool frozen) { bn1_.set_frozen(frozen); }
  bool batch_norm_frozen() const { return bn1_.frozen(); }

  // Honors the current mode. In train mode batch-norm running statistics are
  // updated and dropout is sampled; pass a cache to enable backward().
  Matrix<T> forward(const Matrix<T>& x, Cache* cache = nullptr) {
    check_input(x);
    const bool train = mode_ == Mode::Train;
    Matrix<T> a = conv1_.forward(x, cache ? &cache->conv1 : nullptr);
    a = bn1_.forward(a, train, cache ? &cache->bn1 : nullptr);
    a = conv2_.forward(a, cache ? &cache->conv2 : nullptr);
    a = lstm_.forward(a, cache ? &cache->lstm : nullptr);
    a = dense1_.forward(a, cache ? &cache->dense1 : nullptr);
    a = dropout_.forward(a, train, dropout_rng_, cache ? &cache->dropout : nullptr);
    a = dense2_.forward(a, cache ? &cache->dense2 : nullptr);
    if (cache) cache->valid = true;
    return a;
  }

  // Eval-mode forward that touches no state; safe to call concurrently.
  Matrix<T> predict(const Matrix<T>& x) const {
    check_input(x);
    Matrix<T> a = conv1_.forward(x, nullptr);
    a = bn1_.infer(a);
    a = conv2_.forward(a, nullptr);
    a = lstm_.forward(a, nullptr);
    a = dense1_.forward(a, nullptr);
    return dense2_.forward(a, nullptr);
  }

  // Accumulates dL/dparam for every trainable parameter given dL/doutput.
  // The cache is consumed (marked invalid) to catch a second backward.
  void backward(Cache& cache, const Matrix<T>& d_out, Matrix<T>* d_input = nullptr) {
    if (!cache.valid) throw Error("backward called without a cached forward pass");
    if (d_out.cols() != arch_.actions) throw ValueError("output gradient has wrong width");
    Matrix<T> d = dense2_.backward(cache.dense2, d_out, true);
    d = dropout_.backward(cache.dropout, d);
    d = dense1_.backward(cache.dense1, d, true);
    d = lstm_.backward(cache.lstm, d, true);
    d = conv2_.backward(cache.conv2, d, true);
    d = bn1_.backward(cache.bn1, d);
    d = conv1_.backward(cache.conv1, d, d_input != nullptr);
    if (d_input) *d_input = std::move(d);
    cache.valid = false;
  }

  // Every persisted tensor in a fixed order; non-trainable ones last.
  std::vector<Param<T>*> parameters() {
    return {&conv1_.weight(), &conv1_.bias(), &bn1_.gamma(), &bn1_.beta(), &conv2_.weight(), &conv2_.bias(),
            &lstm_.kernel(), &lstm_.recurrent_kernel(), &lstm_.bias(), &dense1_.weight(), &dense1_.bias(),
            &dense2_.weight(), &dense2_.bias(), &bn1_.moving_mean(), &bn1_.moving_variance()};
  }

  std::vector<const Param<T>*> parameters() const {
    auto all = const_cast<QNetwork*>(this)->parameters();
    return {all.begin(), all.end()};
  }

  std::vector<Param<T>*> trainable_parameters() {
    std::vector<Param<T>*> out;
    for (auto* p : parameters())
      if (p->trainable) out.push_back(p);
    return out;
  }

  Param<T>* find(const std::string& name) {
    for (auto* p : parameters())
      if (p->name == name) return p;
    return nullptr;
  }

  std::size_t parameter_count(bool trainable_only = true) const {
    std::size_t n = 0;
    for (const auto* p : parameters())
      if (p->trainable || !trainable_only) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  // Copies parameter values (and running statistics) from another network
  // of the same architecture. Mode, gradients and RNG state are kept.
  void copy_parameters_from(const QNetwork& other) {
    if (!(other.arch_ == arch_)) throw ValueError("cannot copy parameters across architectures");
    auto dst = parameters();
    auto src = other.parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
  }

 private:
  void check_input(const Matrix<T>& x) const {
    if (x.cols() != input_width())
      throw ValueError("network input must have " + std::to_string(input_width()) + " features per row, got " +
                       std::to_string(x.cols()));
    if (x.rows() == 0) throw ValueError("empty batch");
  }

  Architecture arch_;
  Mode mode_ = Mode::Eval;
  Rng dropout_rng_;
  Conv2D<T> conv1_;
  BatchNorm<T> bn1_;
  Conv2D<T> conv2_;
  Lstm<T> lstm_;
  Dense<T> dense1_;
  Dropout<T> dropout_;
  Dense<T> dense2_;
};

// Row-wise softmax with the max subtracted for stability.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
  Matrix<T> p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  const auto sums = p.rowwise().sum().eval();
  for (Eigen::Index r = 0; r < p.rows(); ++r) p.row(r) /= sums(r);
  return p;
}

// Classification view of a QNetwork used for supervised pre-training: the
// same parameters with a softmax on the output. Holding a reference (not a
// copy) is what makes the later transfer to the DQN a head swap.
template <typename T>
class SoftmaxHead {
 public:
  explicit SoftmaxHead(QNetwork<T>& net) : net_(net) {}

  QNetwork<T>& network() { return net_; }

  Matrix<T> probabilities(const Matrix<T>& x) const { return softmax_rows(net_.predict(x)); }

  // Mean categorical cross-entropy over the batch; accumulates gradients
  // (the caller zeroes them and steps the optimizer).
  T train_step_loss(const Matrix<T>& x, std::span<const int> labels) {
    if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw ValueError("label count != batch size");
    typename QNetwork<T>::Cache cache;
    const Matrix<T> logits = net_.forward(x, &cache);
    const Matrix<T> p = softmax_rows(logits);
    const auto n = static_cast<T>(x.rows());
    Matrix<T> d = p;
    T loss = 0;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const int y = labels[static_cast<std::size_t>(r)];
      if (y < 0 || y >= p.cols()) throw ValueError("label out of range");
      loss -= std::log(std::max(p(r, y), std::numeric_limits<T>::min()));
      d(r, y) -= T(1);
    }
    d /= n;
    net_.backward(cache, d);
    return loss / n;
  }

 private:
  QNetwork<T>& net_;
};

// Lays out feature matrices (coef x frame) as time-major network input rows.
template <typename T = float>
Matrix<T> to_batch(std::span<const dsp::FeatureMatrix* const> features) {
  Matrix<T> x(static_cast<Eigen::Index>(features.size()),
              static_cast<Eigen::Index>(dsp::FeatureMatrix::kSize));
  for (std::size_t n = 0; n < features.size(); ++n) {
    const auto& f = *features[n];
    T* row = x.row(static_cast<Eigen::Index>(n)).data();
    for (std::size_t t = 0; t < dsp::FeatureMatrix::kCols; ++t)
      for (std::size_t c = 0; c < dsp::FeatureMatrix::kRows; ++c)
        row[t * dsp::FeatureMatrix::kRows + c] = static_cast<T>(f(c, t));
  }
  return x;
}

template <typename T = float>
Matrix<T> to_batch(const dsp::FeatureMatrix& f) {
  const dsp::FeatureMatrix* p = &f;
  return to_batch<T>(std::span<const dsp::FeatureMatrix* const>(&p, 1));
}

using QNet = QNetwork<float>;

}  // namespace rlda::nn
