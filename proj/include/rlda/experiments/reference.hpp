#pragma once

#include <array>
#include <string_view>

namespace rlda::experiments::reference {

// Published UAR figures (percent, mean ± std) for the licensed-corpus
// setting. They are not reachable with the bundled synthetic corpora and
// serve as context in reports only.
struct PublishedRow {
  std::string_view setting;  // "separate", "mixed50", "live_feed", "live_feed_noise"
  std::string_view source;
  std::string_view target;
  double baseline_mean;
  double baseline_std;
  double rl_da_mean;
  double rl_da_std;
};

inline constexpr std::array<PublishedRow, 16> kPublished{{
    {"separate", "IEMOCAP", "ESD", 63.54, 2.11, 63.99, 1.95},
    {"separate", "MSP-IMPROV", "ESD", 63.18, 3.34, 66.10, 0.84},
    {"separate", "IEMOCAP", "EmoDB", 74.67, 1.03, 73.17, 0.62},
    {"separate", "MSP-IMPROV", "EmoDB", 56.67, 8.26, 65.50, 0.71},
    {"mixed50", "IEMOCAP", "IEMOCAP+ESD", 56.22, 1.15, 77.86, 0.43},
    {"mixed50", "MSP-IMPROV", "MSP-IMPROV+ESD", 55.52, 0.97, 63.51, 2.40},
    {"mixed50", "IEMOCAP", "IEMOCAP+EmoDB", 61.33, 5.44, 85.67, 2.72},
    {"mixed50", "MSP-IMPROV", "MSP-IMPROV+EmoDB", 59.17, 1.43, 77.33, 1.43},
    {"live_feed", "IEMOCAP", "ESD", 53.11, 1.45, 62.89, 0.51},
    {"live_feed", "MSP-IMPROV", "ESD", 47.07, 2.56, 63.18, 2.15},
    {"live_feed", "IEMOCAP", "EmoDB", 60.67, 1.70, 73.83, 1.55},
    {"live_feed", "MSP-IMPROV", "EmoDB", 46.50, 1.08, 66.17, 0.24},
    {"live_feed_noise", "IEMOCAP", "ESD", 53.11, 1.45, 63.62, 1.65},
    {"live_feed_noise", "MSP-IMPROV", "ESD", 47.07, 2.56, 57.77, 1.46},
    {"live_feed_noise", "IEMOCAP", "EmoDB", 60.67, 1.70, 68.50, 3.63},
    {"live_feed_noise", "MSP-IMPROV", "EmoDB", 46.50, 1.08, 63.67, 1.65},
}};

// Headline relative improvements of RL-DA over the supervised baseline.
inline constexpr double kCrossCorpusGainPercent = 11.0;
inline constexpr double kCrossLanguageGainPercent = 14.0;

}  // namespace rlda::experiments::reference
