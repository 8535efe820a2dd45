#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "rlda/agent/dqn.hpp"
#include "rlda/dsp/pipeline.hpp"
#include "rlda/emotion.hpp"
#include "rlda/env/feedback.hpp"
#include "rlda/error.hpp"
#include "rlda/nn/checkpoint.hpp"
#include "rlda/service/config.hpp"

namespace rlda::service {

class NoModelError : public Error {
 public:
  using Error::Error;
};

// Immutable model published to request handlers.
struct Snapshot {
  nn::QNet net;
  std::int64_t version = 0;
};

struct InferResult {
  std::string inference_id;
  Emotion emotion = Emotion::Neutral;
  std::array<float, kNumEmotions> q_values{};
  std::int64_t model_version = 0;
};

inline nlohmann::json to_json(const InferResult& r) {
  return {{"inference_id", r.inference_id},
          {"emotion", std::string(name(r.emotion))},
          {"q_values", r.q_values},
          {"model_version", r.model_version}};
}

struct Metrics {
  std::uint64_t inferences = 0;
  std::uint64_t feedbacks = 0;
  std::uint64_t drops = 0;     // inferences expired without feedback
  std::uint64_t rejected = 0;  // feedback refused because the trainer queue was full
  std::uint64_t transitions = 0;  // transitions stored in replay
  double rolling_mean_reward = 0.0;
  std::size_t rolling_count = 0;
  std::int64_t model_version = 0;
  std::size_t replay_size = 0;
  std::int64_t training_steps = 0;
  std::size_t pending = 0;
  std::optional<std::string> alarm;
};

inline nlohmann::json to_json(const Metrics& m) {
  return {{"inferences", m.inferences},
          {"feedbacks", m.feedbacks},
          {"drops", m.drops},
          {"rejected", m.rejected},
          {"transitions", m.transitions},
          {"rolling_mean_reward", m.rolling_mean_reward},
          {"rolling_count", m.rolling_count},
          {"model_version", m.model_version},
          {"replay_size", m.replay_size},
          {"training_steps", m.training_steps},
          {"pending", m.pending},
          {"alarm", m.alarm ? nlohmann::json(*m.alarm) : nlohmann::json(nullptr)}};
}

// The online loop: handlers infer on the published snapshot and register the
// inference with the feedback channel; a single trainer thread moves judged
// feedback into replay, trains, and periodically publishes a new snapshot
// and checkpoint.
class EmotionService {
 public:
  using Clock = env::HumanFeedbackChannel::Clock;

  explicit EmotionService(ServiceConfig cfg, Clock clock = [] { return std::chrono::steady_clock::now(); })
      : cfg_((cfg.validate(), std::move(cfg))),
        channel_(cfg_.queue_capacity, std::chrono::seconds(cfg_.feedback_timeout_s), clock) {
    std::random_device rd;
    boot_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
            static_cast<std::uint64_t>(std::chrono::system_clock::now().time_since_epoch().count());
  }

  ~EmotionService() { stop(); }
  EmotionService(const EmotionService&) = delete;
  EmotionService& operator=(const EmotionService&) = delete;

  // Restores from the service checkpoint when it exists, otherwise from the
  // base checkpoint. Without either the service runs but answers 503.
  void start() {
    if (running_) return;
    stopping_ = false;
    std::optional<nn::Checkpoint> ck;
    if (std::filesystem::exists(cfg_.checkpoint_path)) {
      ck = nn::load_checkpoint(cfg_.checkpoint_path);
    } else if (!cfg_.base_checkpoint.empty()) {
      ck = nn::load_checkpoint(cfg_.base_checkpoint);
      ck->meta.model_version = 0;
      ck->meta.step = 0;
      ck->optimizer.reset();
    }
    if (ck) {
      agent::AgentConfig ac;
      ac.gamma = cfg_.gamma;
      ac.batch_size = cfg_.batch_size;
      ac.replay_capacity = cfg_.replay_capacity;
      ac.target_sync = cfg_.target_sync;
      ac.train_start = cfg_.replay_threshold;
      ac.steps_per_update = cfg_.train_every;
      ac.adam.learning_rate = cfg_.learning_rate;
      agent::PolicyConfig greedy;
      greedy.kind = agent::PolicyKind::Greedy;
      agent_ = std::make_unique<agent::DqnAgent>(ck->net, ac, greedy, cfg_.seed);
      if (ck->optimizer) agent_->set_optimizer(*ck->optimizer);
      step_offset_ = ck->meta.step;
      training_steps_ = ck->meta.step;
      auto snap = std::make_shared<Snapshot>(Snapshot{ck->net, ck->meta.model_version});
      snap->net.set_mode(nn::Mode::Eval);
      publish_snapshot(std::move(snap));
      running_ = true;
      trainer_ = std::thread([this] { trainer_loop(); });
    }
  }

  // Expires pending inferences and stops the trainer. The last published
  // checkpoint is what a restart resumes from.
  void stop() {
    {
      std::lock_guard lock(wake_mu_);
      stopping_ = true;
    }
    wake_.notify_all();
    if (trainer_.joinable()) trainer_.join();
    running_ = false;
    channel_.expire_all();
  }

  bool model_loaded() const { return snapshot() != nullptr; }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(snap_mu_);
    return snapshot_;
  }

  InferResult infer(std::span<const std::uint8_t> wav) {
    if (wav.empty()) throw FormatError("empty audio payload");
    auto features = agent::share(dsp::extract_features(wav));
    if (cfg_.keep_audio) keep_upload(wav);
    return infer(std::move(features));
  }

  // One snapshot serves the whole request.
  InferResult infer(agent::FeaturePtr features) {
    const auto snap = snapshot();
    if (!snap) throw NoModelError("no model loaded");
    const auto q = snap->net.predict(nn::to_batch<float>(*features));
    InferResult r;
    for (int a = 0; a < kNumEmotions; ++a) r.q_values[static_cast<std::size_t>(a)] = q(0, a);
    const int action = agent::greedy_action(std::span<const float>(r.q_values));
    r.emotion = emotion_from_code(action);
    r.model_version = snap->version;
    r.inference_id = next_id();
    channel_.register_inference(r.inference_id, std::move(features), action);
    inferences_.fetch_add(1);
    return r;
  }

  // Returns the reward; throws env::FeedbackError for unknown, judged,
  // expired ids and a full queue.
  double feedback(const std::string& id, env::Judgment j) {
    const double reward = channel_.resolve(id, j);
    {
      std::lock_guard lock(roll_mu_);
      rolling_.push_back(reward);
      rolling_sum_ += reward;
      if (rolling_.size() > cfg_.rolling_window) {
        rolling_sum_ -= rolling_.front();
        rolling_.pop_front();
      }
    }
    wake_.notify_one();
    return reward;
  }

  Metrics metrics() const {
    Metrics m;
    channel_.expire();
    const auto c = channel_.counters();
    m.inferences = inferences_.load();
    m.feedbacks = c.judged;
    m.drops = c.dropped;
    m.rejected = c.rejected;
    m.transitions = transitions_.load();
    {
      std::lock_guard lock(roll_mu_);
      m.rolling_count = rolling_.size();
      m.rolling_mean_reward = rolling_.empty() ? 0.0 : rolling_sum_ / static_cast<double>(rolling_.size());
    }
    const auto snap = snapshot();
    m.model_version = snap ? snap->version : 0;
    m.replay_size = replay_size_.load();
    m.training_steps = training_steps_.load();
    m.pending = channel_.pending();
    std::lock_guard lock(alarm_mu_);
    m.alarm = alarm_;
    return m;
  }

  // Blocks until every judged feedback has reached replay and training has
  // caught up, or the timeout passes. Returns whether it became idle.
  bool wait_idle(std::chrono::milliseconds timeout) {
    const auto until = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < until) {
      if (channel_.queued() == 0 && !busy_.load()) return true;
      wake_.notify_one();
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return false;
  }

  const ServiceConfig& config() const { return cfg_; }
  env::HumanFeedbackChannel& channel() { return channel_; }

 private:
  void publish_snapshot(std::shared_ptr<const Snapshot> s) {
    std::lock_guard lock(snap_mu_);
    snapshot_ = std::move(s);
  }

  std::string next_id() {
    std::ostringstream os;
    os << std::hex << boot_ << "-" << std::dec << id_counter_.fetch_add(1);
    return os.str();
  }

  void keep_upload(std::span<const std::uint8_t> wav) {
    const auto dir = cfg_.checkpoint_path.parent_path() / "uploads";
    std::filesystem::create_directories(dir);
    dsp::write_file_bytes(dir / (next_id() + ".wav"), wav);
  }

  void trainer_loop() {
    while (true) {
      {
        std::unique_lock lock(wake_mu_);
        wake_.wait_for(lock, std::chrono::milliseconds(50), [&] { return stopping_ || channel_.queued() > 0; });
        if (stopping_) return;
      }
      busy_ = true;
      for (auto& t : channel_.drain()) {
        if (diverged_) break;
        try {
          agent_->observe(std::move(t));
        } catch (const DivergenceError& e) {
          diverged_ = true;
          std::lock_guard lock(alarm_mu_);
          alarm_ = std::string("training halted: ") + e.what();
        }
        transitions_.fetch_add(1);
        replay_size_ = agent_->replay().size();
        const auto total = step_offset_ + agent_->train_steps();
        if (total != training_steps_.load()) {
          training_steps_ = total;
          if (!diverged_ && total % cfg_.publish_period == 0) publish(total);
        }
      }
      busy_ = false;
    }
  }

  void publish(std::int64_t total_steps) {
    auto snap = std::make_shared<Snapshot>(Snapshot{agent_->online(), snapshot()->version + 1});
    snap->net.set_mode(nn::Mode::Eval);
    nn::CheckpointMeta meta;
    meta.stage = "online";
    meta.step = total_steps;
    meta.model_version = snap->version;
    nn::save_checkpoint(cfg_.checkpoint_path, agent_->online(), &agent_->optimizer(), meta);
    publish_snapshot(std::move(snap));
  }

  ServiceConfig cfg_;
  mutable env::HumanFeedbackChannel channel_;
  std::uint64_t boot_ = 0;
  std::atomic<std::uint64_t> id_counter_{0};

  mutable std::mutex snap_mu_;
  std::shared_ptr<const Snapshot> snapshot_;

  std::unique_ptr<agent::DqnAgent> agent_;  // trainer thread only after start()
  std::int64_t step_offset_ = 0;
  std::thread trainer_;
  std::mutex wake_mu_;
  std::condition_variable wake_;
  bool stopping_ = false;
  bool running_ = false;
  std::atomic<bool> busy_{false};
  bool diverged_ = false;

  std::atomic<std::uint64_t> inferences_{0};
  std::atomic<std::uint64_t> transitions_{0};
  std::atomic<std::size_t> replay_size_{0};
  std::atomic<std::int64_t> training_steps_{0};

  mutable std::mutex roll_mu_;
  std::deque<double> rolling_;
  double rolling_sum_ = 0.0;

  mutable std::mutex alarm_mu_;
  std::optional<std::string> alarm_;
};

}  // namespace rlda::service
