#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rlda/agent/transition.hpp"
#include "rlda/dsp/mfcc.hpp"
#include "rlda/dsp/noise.hpp"
#include "rlda/emotion.hpp"
#include "rlda/error.hpp"

namespace rlda::env {

using agent::FeaturePtr;

// Scripted reward map: +1 iff the inferred emotion is the ground truth.
inline double scripted_reward(int action, Emotion label) { return action == code(label) ? 1.0 : -1.0; }

struct Sample {
  std::string id;
  Emotion label = Emotion::Neutral;
  FeaturePtr features;                          // clean features
  std::shared_ptr<const dsp::Waveform> audio;   // conformed clip; needed only when noise is mixed in
};

enum class Ordering { ShuffledEpoch, EndlessRandom };

inline std::string_view to_string(Ordering o) { return o == Ordering::ShuffledEpoch ? "shuffled_epoch" : "endless_random"; }

inline Ordering parse_ordering(std::string_view s) {
  if (s == "shuffled_epoch") return Ordering::ShuffledEpoch;
  if (s == "endless_random") return Ordering::EndlessRandom;
  throw ValueError("unknown stream ordering '" + std::string(s) + "'");
}

struct NoiseConfig {
  std::shared_ptr<const std::vector<dsp::Waveform>> recordings;  // at the feature rate
  double snr_db = -5.0;
};

struct StreamConfig {
  Ordering ordering = Ordering::ShuffledEpoch;
  std::size_t episode_length = 256;
  std::optional<NoiseConfig> noise;
  std::uint64_t seed = 0;
};

struct EnvState {
  std::string utterance_id;
  FeaturePtr features;
  std::size_t position = 0;  // steps taken in the current episode
  bool done = false;
};

struct StepResult {
  double reward = 0.0;
  EnvState next;
  bool done = false;
};

// Emotion recognition as an RL environment: the state is an utterance, the
// action an emotion, the reward scripted feedback on correctness. The next
// state is the following utterance of the stream whatever the action.
//
// ShuffledEpoch: each epoch is a fresh permutation cut into episodes of at
// most `episode_length` utterances. EndlessRandom: utterances drawn with
// replacement, episodes never end.
class EmotionEnv {
 public:
  EmotionEnv(std::vector<Sample> samples, StreamConfig cfg) : samples_(std::move(samples)), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    if (samples_.empty()) throw ValueError("environment needs at least one utterance");
    if (cfg_.episode_length == 0) throw ValueError("episode length must be positive");
    if (cfg_.noise) {
      if (!cfg_.noise->recordings || cfg_.noise->recordings->empty()) throw ValueError("noise configured without recordings");
      for (const auto& s : samples_)
        if (!s.audio) throw ValueError("noise mixing needs audio for utterance '" + s.id + "'");
    }
    for (const auto& s : samples_)
      if (!s.features) throw ValueError("utterance '" + s.id + "' has no features");
  }

  EnvState reset() {
    position_ = 0;
    episode_.clear();
    if (cfg_.ordering == Ordering::ShuffledEpoch) {
      if (cursor_ >= order_.size()) {
        order_.resize(samples_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      const std::size_t len = std::min(cfg_.episode_length, order_.size() - cursor_);
      episode_.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                      order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + len));
      cursor_ += len;
    }
    ++episodes_;
    started_ = true;
    current_ = draw();
    state_ = make_state(current_, false);
    return state_;
  }

  StepResult step(int action) {
    if (!started_) throw ValueError("step before reset");
    if (state_.done) throw ValueError("step after the episode ended; call reset()");
    if (action < 0 || action >= kNumEmotions) throw ValueError("action out of range");
    StepResult r;
    r.reward = scripted_reward(action, samples_[current_].label);
    ++position_;
    if (cfg_.ordering == Ordering::ShuffledEpoch && position_ >= episode_.size()) {
      state_.done = true;
      state_.position = position_;
      r.next = state_;
      r.next.features = nullptr;
      r.done = true;
      return r;
    }
    current_ = draw();
    state_ = make_state(current_, false);
    r.next = state_;
    return r;
  }

  const EnvState& state() const { return state_; }
  const Sample& current_sample() const { return samples_[current_]; }
  std::int64_t episodes() const { return episodes_; }
  const std::vector<Sample>& samples() const { return samples_; }
  const StreamConfig& config() const { return cfg_; }

 private:
  std::size_t draw() {
    if (cfg_.ordering == Ordering::ShuffledEpoch) return episode_[position_];
    return std::uniform_int_distribution<std::size_t>(0, samples_.size() - 1)(rng_);
  }

  EnvState make_state(std::size_t idx, bool done) {
    const Sample& s = samples_[idx];
    EnvState st;
    st.utterance_id = s.id;
    st.position = position_;
    st.done = done;
    if (!cfg_.noise) {
      st.features = s.features;
    } else {
      const auto& bank = *cfg_.noise->recordings;
      const auto which = std::uniform_int_distribution<std::size_t>(0, bank.size() - 1)(rng_);
      const auto mix = dsp::mix_noise(*s.audio, bank[which], cfg_.noise->snr_db, rng_());
      st.features = agent::share(dsp::mfcc(mix.mixture));
    }
    return st;
  }

  std::vector<Sample> samples_;
  StreamConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> episode_;
  std::size_t position_ = 0;
  std::size_t current_ = 0;
  std::int64_t episodes_ = 0;
  bool started_ = false;
  EnvState state_;
};

}  // namespace rlda::env

namespace rlda::env {

// The simulated live feed: endless sampling with replacement.
inline EmotionEnv make_live_feed(std::vector<Sample> target, StreamConfig cfg) {
  if (cfg.ordering != Ordering::EndlessRandom) throw ValueError("a live feed needs endless_random ordering");
  return EmotionEnv(std::move(target), std::move(cfg));
}

}  // namespace rlda::env
