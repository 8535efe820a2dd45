#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "rlda/agent/policy.hpp"
#include "rlda/agent/replay.hpp"
#include "rlda/agent/transition.hpp"
#include "rlda/error.hpp"
#include "rlda/nn/adam.hpp"
#include "rlda/nn/qnetwork.hpp"

namespace rlda::agent {

struct AgentConfig {
  double gamma = 0.9;
  std::size_t batch_size = 128;
  std::size_t replay_capacity = 10000;
  std::int64_t target_sync = 500;  // train steps between target copies; 0 bootstraps from the online net
  std::size_t train_start = 128;   // replay size before the first update
  std::int64_t steps_per_update = 1;
  bool freeze_batch_norm = false;
  nn::AdamConfig adam;

  void validate() const {
    if (gamma < 0 || gamma > 1) throw ValueError("gamma must lie in [0, 1]");
    if (batch_size == 0) throw ValueError("batch size must be positive");
    if (replay_capacity < batch_size) throw ValueError("replay capacity is smaller than the batch size");
    if (target_sync < 0) throw ValueError("target sync period must be >= 0");
    if (steps_per_update <= 0) throw ValueError("steps per update must be positive");
    if (!(adam.learning_rate > 0)) throw ValueError("learning rate must be positive");
  }
};

// Regression targets: r for terminal transitions, otherwise
// r + gamma * max_a Q_target(s', a). The target net is evaluated in
// inference mode.
inline std::vector<double> compute_targets(std::span<const Transition> batch, const nn::QNet& target_net,
                                           double gamma) {
  std::vector<double> out(batch.size());
  std::vector<const dsp::FeatureMatrix*> next;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out[i] = batch[i].reward;
    if (!batch[i].terminal && gamma != 0.0) {
      next.push_back(batch[i].next_state.get());
      where.push_back(i);
    }
  }
  if (!next.empty()) {
    const auto q = target_net.predict(nn::to_batch<float>(next));
    for (std::size_t j = 0; j < where.size(); ++j)
      out[where[j]] += gamma * static_cast<double>(q.row(static_cast<Eigen::Index>(j)).maxCoeff());
  }
  return out;
}

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // dL/dq for each selected q-value
};

// Mean squared TD error.
inline LossResult dqn_loss(std::span<const double> q_selected, std::span<const double> targets) {
  if (q_selected.size() != targets.size()) throw ValueError("q and target batches differ in length");
  if (q_selected.empty()) throw ValueError("empty batch");
  const double n = static_cast<double>(q_selected.size());
  LossResult r;
  r.grad.resize(q_selected.size());
  for (std::size_t i = 0; i < q_selected.size(); ++i) {
    const double td = targets[i] - q_selected[i];
    r.loss += td * td / n;
    r.grad[i] = -2.0 * td / n;
  }
  return r;
}

class DqnAgent {
 public:
  DqnAgent(nn::QNet initial, AgentConfig cfg, PolicyConfig policy, std::uint64_t seed)
      : cfg_(cfg),
        policy_(policy),
        online_(std::move(initial)),
        target_(online_),
        optimizer_(cfg.adam),
        replay_(cfg.replay_capacity, seed ^ 0x5851f42d4c957f2dull),
        rng_(seed) {
    cfg_.validate();
    policy_.validate();
    online_.set_mode(nn::Mode::Train);
    online_.set_batch_norm_frozen(cfg_.freeze_batch_norm);
    online_.reseed_dropout(seed);
    target_.set_mode(nn::Mode::Eval);
  }

  std::array<float, kNumEmotions> q_values(const dsp::FeatureMatrix& f) const {
    const auto q = online_.predict(nn::to_batch<float>(f));
    std::array<float, kNumEmotions> out{};
    for (int a = 0; a < kNumEmotions; ++a) out[static_cast<std::size_t>(a)] = q(0, a);
    return out;
  }

  // Behavior policy at the current exploration level.
  int act(const dsp::FeatureMatrix& f) {
    const auto q = q_values(f);
    return select_action(policy_, std::span<const float>(q), epsilon(), rng_);
  }

  int act_greedy(const dsp::FeatureMatrix& f) const {
    const auto q = q_values(f);
    return greedy_action(std::span<const float>(q));
  }

  double epsilon() const { return policy_.epsilon.at(env_steps_); }

  // Stores the transition and trains when the cadence and replay threshold
  // allow. Returns the loss of the update, if one happened.
  std::optional<double> observe(Transition t) {
    replay_.push(std::move(t));
    ++env_steps_;
    if (!ready() || env_steps_ % cfg_.steps_per_update != 0) return std::nullopt;
    return train_on_batch(replay_.sample(cfg_.batch_size));
  }

  bool ready() const { return replay_.size() >= std::max(cfg_.train_start, cfg_.batch_size); }

  double train_on_batch(std::span<const Transition> batch) {
    if (batch.empty()) throw ValueError("empty training batch");
    const auto targets = bootstrap_targets(batch);

    std::vector<const dsp::FeatureMatrix*> states;
    states.reserve(batch.size());
    for (const auto& t : batch) states.push_back(t.state.get());
    nn::QNet::Cache cache;
    const auto q = online_.forward(nn::to_batch<float>(states), &cache);

    std::vector<double> selected(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      selected[i] = static_cast<double>(q(static_cast<Eigen::Index>(i), batch[i].action));
    const auto loss = dqn_loss(selected, targets);
    if (!std::isfinite(loss.loss))
      throw DivergenceError("dqn loss is not finite at train step " + std::to_string(train_steps_ + 1));

    nn::Matrix<float> d_out = nn::Matrix<float>::Zero(q.rows(), q.cols());
    for (std::size_t i = 0; i < batch.size(); ++i)
      d_out(static_cast<Eigen::Index>(i), batch[i].action) = static_cast<float>(loss.grad[i]);
    online_.zero_grad();
    online_.backward(cache, d_out);
    optimizer_.step(online_.trainable_parameters());
    ++train_steps_;

    if (cfg_.target_sync == 0) {
      next_q_.clear();
    } else if (train_steps_ % cfg_.target_sync == 0) {
      target_.copy_parameters_from(online_);
      next_q_.clear();
    }
    return loss.loss;
  }

  const AgentConfig& config() const { return cfg_; }
  const PolicyConfig& policy() const { return policy_; }
  const nn::QNet& online() const { return online_; }
  nn::QNet& online() { return online_; }
  const nn::QNet& target() const { return target_; }
  nn::Adam<float>& optimizer() { return optimizer_; }
  const nn::Adam<float>& optimizer() const { return optimizer_; }
  void set_optimizer(nn::Adam<float> opt) { optimizer_ = std::move(opt); }
  ReplayBuffer& replay() { return replay_; }
  const ReplayBuffer& replay() const { return replay_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t train_steps() const { return train_steps_; }

 private:
  // compute_targets with next-state values memoized until the bootstrap
  // network next changes.
  std::vector<double> bootstrap_targets(std::span<const Transition> batch) {
    const nn::QNet& net = cfg_.target_sync == 0 ? online_ : target_;
    if (next_q_.size() > 4 * cfg_.replay_capacity) next_q_.clear();
    std::vector<const dsp::FeatureMatrix*> missing;
    std::vector<FeaturePtr> owners;
    if (cfg_.gamma != 0.0) {
      for (const auto& t : batch) {
        if (t.terminal) continue;
        const auto* key = t.next_state.get();
        if (next_q_.count(key) || std::find(missing.begin(), missing.end(), key) != missing.end()) continue;
        missing.push_back(key);
        owners.push_back(t.next_state);
      }
    }
    if (!missing.empty()) {
      const auto q = net.predict(nn::to_batch<float>(missing));
      for (std::size_t j = 0; j < missing.size(); ++j)
        next_q_[missing[j]] = {owners[j], q.row(static_cast<Eigen::Index>(j)).maxCoeff()};
    }
    std::vector<double> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      out[i] = batch[i].reward;
      if (!batch[i].terminal && cfg_.gamma != 0.0)
        out[i] += cfg_.gamma * static_cast<double>(next_q_.at(batch[i].next_state.get()).max_q);
    }
    return out;
  }

  struct CachedValue {
    FeaturePtr owner;  // keeps the key alive
    float max_q;
  };

  AgentConfig cfg_;
  PolicyConfig policy_;
  nn::QNet online_;
  nn::QNet target_;
  nn::Adam<float> optimizer_;
  ReplayBuffer replay_;
  nn::Rng rng_;
  std::int64_t env_steps_ = 0;
  std::int64_t train_steps_ = 0;
  std::unordered_map<const dsp::FeatureMatrix*, CachedValue> next_q_;
};

}  // namespace rlda::agent
