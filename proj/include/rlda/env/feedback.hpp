#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rlda/agent/transition.hpp"
#include "rlda/error.hpp"

namespace rlda::env {

enum class Judgment { Up, Down };

inline double judgment_reward(Judgment j) { return j == Judgment::Up ? 1.0 : -1.0; }

inline Judgment parse_judgment(std::string_view s) {
  if (s == "up") return Judgment::Up;
  if (s == "down") return Judgment::Down;
  throw ValueError("judgment must be 'up' or 'down'");
}

class FeedbackError : public Error {
 public:
  enum class Kind { UnknownId, AlreadyJudged, Expired, QueueFull };
  FeedbackError(Kind k, const std::string& msg) : Error(msg), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class InferenceStatus { Pending, Judged, Expired };

// Human feedback: inferences wait for a thumbs up/down until a timeout.
// Judgments become terminal transitions (reward only, no next state) in a
// bounded queue drained by a single trainer. Producers never block: a full
// queue is reported as an error.
class HumanFeedbackChannel {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  struct Counters {
    std::uint64_t registered = 0;
    std::uint64_t judged = 0;
    std::uint64_t dropped = 0;  // expired without a judgment
    std::uint64_t rejected = 0; // judgments refused because the queue was full
    std::uint64_t delivered = 0;
  };

  explicit HumanFeedbackChannel(std::size_t capacity = 4096, std::chrono::seconds timeout = std::chrono::seconds(300),
                                Clock clock = [] { return std::chrono::steady_clock::now(); })
      : capacity_(capacity), timeout_(timeout), clock_(std::move(clock)) {
    if (capacity == 0) throw ValueError("feedback queue capacity must be positive");
  }

  void register_inference(const std::string& id, agent::FeaturePtr features, int action) {
    std::lock_guard lock(mu_);
    expire_locked();
    if (!features) throw ValueError("inference without features");
    auto [it, fresh] = records_.try_emplace(id);
    if (!fresh) throw ValueError("inference id '" + id + "' already registered");
    const auto now = clock_();
    it->second = {std::move(features), action, now, InferenceStatus::Pending};
    order_.push_back({id, now});
    ++counters_.registered;
  }

  // Returns the reward delivered to the trainer queue.
  double resolve(const std::string& id, Judgment j) {
    std::lock_guard lock(mu_);
    expire_locked();
    auto it = records_.find(id);
    if (it == records_.end()) throw FeedbackError(FeedbackError::Kind::UnknownId, "unknown inference id '" + id + "'");
    auto& rec = it->second;
    if (rec.status == InferenceStatus::Judged)
      throw FeedbackError(FeedbackError::Kind::AlreadyJudged, "inference '" + id + "' was already judged");
    if (rec.status == InferenceStatus::Expired)
      throw FeedbackError(FeedbackError::Kind::Expired, "inference '" + id + "' expired");
    if (queue_.size() >= capacity_) {
      ++counters_.rejected;
      throw FeedbackError(FeedbackError::Kind::QueueFull, "feedback queue full");
    }
    const double reward = judgment_reward(j);
    queue_.push_back({rec.features, rec.action, reward, nullptr, true});
    rec.status = InferenceStatus::Judged;
    rec.features.reset();
    ++counters_.judged;
    return reward;
  }

  // Consumer side.
  std::vector<agent::Transition> drain(std::size_t max = SIZE_MAX) {
    std::lock_guard lock(mu_);
    std::vector<agent::Transition> out;
    while (!queue_.empty() && out.size() < max) {
      out.push_back(std::move(queue_.front()));
      queue_.pop_front();
    }
    counters_.delivered += out.size();
    return out;
  }

  // Marks every pending inference older than the timeout as expired.
  std::size_t expire() {
    std::lock_guard lock(mu_);
    return expire_locked();
  }

  // Expires everything still pending regardless of age (shutdown).
  std::size_t expire_all() {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (auto& [id, rec] : records_) {
      if (rec.status != InferenceStatus::Pending) continue;
      rec.status = InferenceStatus::Expired;
      rec.features.reset();
      ++n;
    }
    counters_.dropped += n;
    return n;
  }

  std::optional<InferenceStatus> status(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = records_.find(id);
    if (it == records_.end()) return std::nullopt;
    return it->second.status;
  }

  Counters counters() const {
    std::lock_guard lock(mu_);
    return counters_;
  }

  std::size_t queued() const {
    std::lock_guard lock(mu_);
    return queue_.size();
  }

  std::size_t pending() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [id, rec] : records_) n += rec.status == InferenceStatus::Pending;
    return n;
  }

  std::chrono::seconds timeout() const { return timeout_; }

 private:
  struct Record {
    agent::FeaturePtr features;
    int action = 0;
    std::chrono::steady_clock::time_point created;
    InferenceStatus status = InferenceStatus::Pending;
  };

  // Records are registered in time order, so stale ones sit at the front
  // of `order_`. Settled records are forgotten after a second timeout.
  std::size_t expire_locked() {
    const auto now = clock_();
    std::size_t n = 0;
    while (scanned_ < order_.size() && now - order_[scanned_].created >= timeout_) {
      auto& rec = records_.at(order_[scanned_].id);
      if (rec.status == InferenceStatus::Pending) {
        rec.status = InferenceStatus::Expired;
        rec.features.reset();
        ++n;
      }
      ++scanned_;
    }
    while (!order_.empty() && now - order_.front().created >= 2 * timeout_) {
      records_.erase(order_.front().id);
      order_.pop_front();
      --scanned_;
    }
    counters_.dropped += n;
    return n;
  }

  struct Entry {
    std::string id;
    std::chrono::steady_clock::time_point created;
  };

  std::size_t capacity_;
  std::chrono::seconds timeout_;
  Clock clock_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Record> records_;
  std::deque<Entry> order_;
  std::size_t scanned_ = 0;
  std::deque<agent::Transition> queue_;
  Counters counters_;
};

}  // namespace rlda::env
