#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "rlda/env/environment.hpp"
#include "rlda/experiments/evaluate.hpp"
#include "rlda/nn/adam.hpp"
#include "rlda/nn/qnetwork.hpp"

namespace rlda::experiments {

struct SupervisedConfig {
  int epochs = 20;
  std::size_t batch_size = 32;
  int patience = 5;               // epochs without held-out improvement
  double holdout_fraction = 0.1;  // stratified; 0 disables early stopping
  nn::AdamConfig adam;
};

struct SupervisedResult {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_holdout_accuracy = 0.0;  // percent; 0 without a holdout
  std::vector<double> train_loss;      // per epoch
  std::vector<double> holdout_accuracy;
  nn::Adam<float> optimizer;
};

inline double accuracy(const nn::QNet& net, std::span<const env::Sample> samples) {
  const auto pred = predict_classes(net, samples);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) ok += pred[i] == code(samples[i].label);
  return 100.0 * static_cast<double>(ok) / static_cast<double>(samples.size());
}

// Per-class stratified holdout with max(1, round(n * fraction)) per class.
inline void stratified_holdout(std::span<const env::Sample> all, double fraction, std::uint64_t seed,
                               std::vector<env::Sample>& train, std::vector<env::Sample>& holdout) {
  train.clear();
  holdout.clear();
  std::mt19937_64 rng(seed);
  std::vector<bool> hold(all.size(), false);
  for (Emotion e : kAllEmotions) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (all[i].label == e) idx.push_back(i);
    if (idx.size() < 2) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = std::min(idx.size() - 1, std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                                                          static_cast<double>(idx.size()) * fraction))));
    for (std::size_t k = 0; k < n; ++k) hold[idx[k]] = true;
  }
  for (std::size_t i = 0; i < all.size(); ++i) (hold[i] ? holdout : train).push_back(all[i]);
}

// Cross-entropy training of the softmax view of `net`, in place. With a
// holdout, the parameters of the best held-out epoch are restored at the end
// and training stops after `patience` epochs without improvement.
inline SupervisedResult train_supervised(nn::QNet& net, std::span<const env::Sample> data, const SupervisedConfig& cfg,
                                         std::uint64_t seed) {
  if (data.empty()) throw ValueError("supervised training needs data");
  if (cfg.batch_size == 0) throw ValueError("batch size must be positive");
  SupervisedResult result{0, 0, 0.0, {}, {}, nn::Adam<float>(cfg.adam)};
  std::vector<env::Sample> train, holdout;
  if (cfg.holdout_fraction > 0) {
    stratified_holdout(data, cfg.holdout_fraction, seed ^ 0x4f1bbcdcbfa53e0bull, train, holdout);
  } else {
    train.assign(data.begin(), data.end());
  }
  if (train.empty()) throw ValueError("no training data left after the holdout");

  const auto saved_mode = net.mode();
  net.set_mode(nn::Mode::Train);
  nn::SoftmaxHead<float> head(net);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::QNet best = net;
  double best_acc = -1.0;
  int since_best = 0;
  std::vector<const dsp::FeatureMatrix*> rows;
  std::vector<int> labels;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
      rows.clear();
      labels.clear();
      for (std::size_t j = i; j < std::min(order.size(), i + cfg.batch_size); ++j) {
        rows.push_back(train[order[j]].features.get());
        labels.push_back(code(train[order[j]].label));
      }
      if (rows.size() < 2 && order.size() >= 2) continue;  // batch statistics need two rows
      net.zero_grad();
      const float loss = head.train_step_loss(nn::to_batch<float>(rows), labels);
      if (!std::isfinite(loss)) throw DivergenceError("supervised loss is not finite in epoch " + std::to_string(epoch));
      result.optimizer.step(net.trainable_parameters());
      loss_sum += loss;
      ++batches;
    }
    result.epochs_run = epoch;
    result.train_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    if (holdout.empty()) continue;
    const double acc = accuracy(net, holdout);
    result.holdout_accuracy.push_back(acc);
    if (acc > best_acc) {
      best_acc = acc;
      best = net;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (!holdout.empty() && best_acc >= 0) {
    net.copy_parameters_from(best);
    result.best_holdout_accuracy = best_acc;
  }
  net.set_mode(saved_mode);
  return result;
}

}  // namespace rlda::experiments
