#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rlda/error.hpp"

namespace rlda::dsp {

inline constexpr int kFeatureRate = 22050;
inline constexpr double kClipSeconds = 2.0;

struct Waveform {
  std::vector<float> samples;
  int sample_rate_hz = kFeatureRate;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

inline void validate(const Waveform& w) {
  if (w.sample_rate_hz <= 0) throw ValueError("waveform sample rate must be positive");
  if (w.samples.empty()) throw ValueError("waveform is empty");
  for (float s : w.samples)
    if (!std::isfinite(s)) throw ValueError("waveform contains non-finite samples");
}

inline double rms(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

inline double rms(const Waveform& w) { return rms(w.samples); }

// Frame size used by the onset detector in fix_duration.
inline constexpr std::size_t kOnsetFrame = 512;
inline constexpr double kOnsetFraction = 0.02;

// First sample of the first kOnsetFrame-block whose RMS exceeds 2% of the
// loudest block. Returns 0 for silent input.
inline std::size_t energy_onset(std::span<const float> x) {
  const std::size_t blocks = (x.size() + kOnsetFrame - 1) / kOnsetFrame;
  std::vector<double> block_rms(blocks);
  double peak = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t begin = b * kOnsetFrame;
    const std::size_t len = std::min(kOnsetFrame, x.size() - begin);
    block_rms[b] = rms(x.subspan(begin, len));
    peak = std::max(peak, block_rms[b]);
  }
  if (peak <= 0.0) return 0;
  for (std::size_t b = 0; b < blocks; ++b)
    if (block_rms[b] > kOnsetFraction * peak) return b * kOnsetFrame;
  return 0;
}

// Pads with zeros at the end or truncates starting at the energy onset, so
// the result holds exactly round(seconds * rate) samples.
inline Waveform fix_duration(const Waveform& w, double seconds) {
  if (!(seconds > 0.0)) throw ValueError("fix_duration: seconds must be positive");
  const auto target = static_cast<std::size_t>(std::llround(seconds * w.sample_rate_hz));
  Waveform out{{}, w.sample_rate_hz};
  if (w.size() <= target) {
    out.samples = w.samples;
    out.samples.resize(target, 0.0f);
    return out;
  }
  const std::size_t start = std::min(energy_onset(w.samples), w.size() - target);
  out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(start + target));
  return out;
}

}  // namespace rlda::dsp
