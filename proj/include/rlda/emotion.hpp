#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "rlda/error.hpp"

namespace rlda {

// The four categorical emotions. Integer codes are stable and double as the
// action index of the Q-network output.
enum class Emotion : std::uint8_t { Happiness = 0, Sadness = 1, Anger = 2, Neutral = 3 };

inline constexpr int kNumEmotions = 4;

inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::Happiness, Emotion::Sadness, Emotion::Anger, Emotion::Neutral};

inline constexpr int code(Emotion e) { return static_cast<int>(e); }

inline Emotion emotion_from_code(int c) {
  if (c < 0 || c >= kNumEmotions) throw ValueError("emotion code out of range: " + std::to_string(c));
  return static_cast<Emotion>(c);
}

inline constexpr std::string_view name(Emotion e) {
  switch (e) {
    case Emotion::Happiness: return "happiness";
    case Emotion::Sadness: return "sadness";
    case Emotion::Anger: return "anger";
    case Emotion::Neutral: return "neutral";
  }
  return "?";
}

inline std::optional<Emotion> parse_emotion(std::string_view s) {
  for (Emotion e : kAllEmotions)
    if (name(e) == s) return e;
  return std::nullopt;
}

}  // namespace rlda
