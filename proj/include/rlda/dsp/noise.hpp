#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

#include "rlda/dsp/waveform.hpp"
#include "rlda/error.hpp"

namespace rlda::dsp {

struct NoiseMix {
  Waveform mixture;
  double gain = 0.0;         // applied to the noise segment before summing
  double peak_scale = 1.0;   // < 1 when the sum was renormalized to avoid clipping
  std::size_t offset = 0;    // start of the noise segment (circular)
};

// `length` samples of noise starting at `offset`, wrapping around (tiling)
// when the recording is shorter than requested.
inline std::vector<float> noise_segment(const Waveform& noise, std::size_t length, std::size_t offset) {
  std::vector<float> seg(length);
  for (std::size_t i = 0; i < length; ++i) seg[i] = noise.samples[(offset + i) % noise.size()];
  return seg;
}

inline double noise_gain(double speech_rms, double noise_rms, double snr_db) {
  return (speech_rms / noise_rms) * std::pow(10.0, -snr_db / 20.0);
}

// Adds noise at the requested SNR. The noise segment starts at a random
// (seeded) offset; shorter recordings are tiled circularly. If the sum would
// leave [-1, 1] the whole mixture is scaled down, which keeps the SNR.
inline NoiseMix mix_noise(const Waveform& speech, const Waveform& noise, double snr_db, std::uint64_t seed) {
  if (speech.sample_rate_hz != noise.sample_rate_hz)
    throw ValueError("mix_noise: speech and noise sample rates differ");
  if (speech.samples.empty() || noise.samples.empty()) throw ValueError("mix_noise: empty input");
  const double speech_rms = rms(speech);
  if (speech_rms <= 0.0) throw ValueError("mix_noise: speech has zero energy");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, noise.size() - 1);
  NoiseMix out;
  out.offset = pick(rng);
  const auto segment = noise_segment(noise, speech.size(), out.offset);
  const double segment_rms = rms(segment);
  if (segment_rms <= 0.0) throw ValueError("mix_noise: noise segment has zero energy");
  out.gain = noise_gain(speech_rms, segment_rms, snr_db);

  std::vector<double> sum(speech.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    sum[i] = speech.samples[i] + out.gain * segment[i];
    peak = std::max(peak, std::abs(sum[i]));
  }
  out.peak_scale = peak > 1.0 ? 1.0 / peak : 1.0;
  out.mixture.sample_rate_hz = speech.sample_rate_hz;
  out.mixture.samples.resize(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i)
    out.mixture.samples[i] = static_cast<float>(std::clamp(sum[i] * out.peak_scale, -1.0, 1.0));
  return out;
}

}  // namespace rlda::dsp
