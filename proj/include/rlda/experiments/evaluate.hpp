#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rlda/emotion.hpp"
#include "rlda/env/environment.hpp"
#include "rlda/error.hpp"
#include "rlda/nn/qnetwork.hpp"

namespace rlda::experiments {

// Rows: ground truth, columns: prediction.
using ConfusionMatrix = std::array<std::array<std::uint64_t, kNumEmotions>, kNumEmotions>;

struct UarResult {
  ConfusionMatrix confusion{};
  std::array<std::optional<double>, kNumEmotions> recall{};  // absent classes have none
  double uar = 0.0;                                         // percent
  std::size_t count = 0;
};

// Mean recall over the classes present in the confusion matrix, in percent.
inline UarResult uar_from_confusion(const ConfusionMatrix& cm) {
  UarResult r;
  r.confusion = cm;
  double sum = 0.0;
  int present = 0;
  for (int t = 0; t < kNumEmotions; ++t) {
    std::uint64_t row = 0;
    for (int p = 0; p < kNumEmotions; ++p) row += cm[t][p];
    r.count += row;
    if (row == 0) continue;
    const double rec = static_cast<double>(cm[t][t]) / static_cast<double>(row);
    r.recall[static_cast<std::size_t>(t)] = rec;
    sum += rec;
    ++present;
  }
  if (present == 0) throw ValueError("cannot compute UAR on an empty test set");
  r.uar = 100.0 * sum / present;
  return r;
}

inline UarResult uar_from_predictions(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw ValueError("truth and prediction counts differ");
  ConfusionMatrix cm{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= kNumEmotions || predicted[i] < 0 || predicted[i] >= kNumEmotions)
      throw ValueError("class index out of range");
    ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return uar_from_confusion(cm);
}

// Greedy predictions of `net` in inference mode.
inline std::vector<int> predict_classes(const nn::QNet& net, std::span<const env::Sample> samples,
                                        std::size_t batch = 64) {
  std::vector<int> out;
  out.reserve(samples.size());
  std::vector<const dsp::FeatureMatrix*> rows;
  for (std::size_t i = 0; i < samples.size(); i += batch) {
    rows.clear();
    for (std::size_t j = i; j < std::min(samples.size(), i + batch); ++j) rows.push_back(samples[j].features.get());
    const auto q = net.predict(nn::to_batch<float>(rows));
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      Eigen::Index best = 0;
      q.row(r).maxCoeff(&best);
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

inline UarResult evaluate_uar(const nn::QNet& net, std::span<const env::Sample> test) {
  if (test.empty()) throw ValueError("cannot evaluate on an empty test set");
  const auto predicted = predict_classes(net, test);
  std::vector<int> truth;
  truth.reserve(test.size());
  for (const auto& s : test) truth.push_back(code(s.label));
  return uar_from_predictions(truth, predicted);
}

}  // namespace rlda::experiments
