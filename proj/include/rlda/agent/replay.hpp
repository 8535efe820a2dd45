#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rlda/agent/transition.hpp"
#include "rlda/error.hpp"

namespace rlda::agent {

// Fixed-capacity ring of transitions; the oldest entry is overwritten once
// full. Sampling draws distinct slots uniformly.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, std::uint64_t seed = 0) : capacity_(capacity), rng_(seed) {
    if (capacity == 0) throw ValueError("replay capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition t) {
    t.validate();
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
    ++pushed_;
  }

  std::vector<Transition> sample(std::size_t n) { return sample(n, rng_); }

  // Partial Fisher-Yates over slot indices.
  template <typename Urbg>
  std::vector<Transition> sample(std::size_t n, Urbg& rng) const {
    if (n == 0) throw ValueError("cannot sample zero transitions");
    if (n > items_.size())
      throw ValueError("replay holds " + std::to_string(items_.size()) + " transitions, " + std::to_string(n) +
                       " requested");
    std::vector<std::size_t> idx(items_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.push_back(items_[idx[i]]);
    }
    return out;
  }

  // Oldest first.
  std::vector<Transition> contents() const {
    std::vector<Transition> out;
    out.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) out.push_back(items_[(head_ + i) % items_.size()]);
    return out;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_pushed() const { return pushed_; }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::uint64_t pushed_ = 0;
  std::vector<Transition> items_;
  std::mt19937_64 rng_;
};

}  // namespace rlda::agent
