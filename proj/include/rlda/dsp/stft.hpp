#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "rlda/dsp/fft.hpp"
#include "rlda/error.hpp"

namespace rlda::dsp {

// Periodic Hann window (the DFT-even variant used for spectral analysis).
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

// Mirror padding that does not repeat the edge sample.
inline std::vector<double> reflect_pad(std::span<const float> x, std::size_t pad) {
  if (x.size() <= pad) throw ValueError("signal too short for reflect padding");
  std::vector<double> out(x.size() + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    out[pad - 1 - i] = x[i + 1];
    out[pad + x.size() + i] = x[x.size() - 2 - i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[pad + i] = x[i];
  return out;
}

// frames[t][k]: centered frames (reflect-padded by n_fft/2 on both sides),
// periodic Hann analysis window, n_fft/2 + 1 bins per frame.
struct Spectrogram {
  std::size_t n_fft = 0;
  std::size_t hop = 0;
  std::vector<std::vector<std::complex<double>>> frames;

  std::size_t num_frames() const { return frames.size(); }
  std::size_t num_bins() const { return n_fft / 2 + 1; }
};

inline std::size_t centered_frame_count(std::size_t length, std::size_t hop) { return 1 + length / hop; }

inline Spectrogram stft(std::span<const float> x, std::size_t n_fft, std::size_t hop) {
  const Fft fft(n_fft);
  const auto window = hann_window(n_fft);
  const auto padded = reflect_pad(x, n_fft / 2);
  Spectrogram s{n_fft, hop, {}};
  const std::size_t frames = 1 + (padded.size() - n_fft) / hop;
  s.frames.reserve(frames);
  std::vector<double> buf(n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n_fft; ++i) buf[i] = padded[t * hop + i] * window[i];
    s.frames.push_back(fft.rfft(buf));
  }
  return s;
}

// Weighted overlap-add inverse with squared-window normalization; trims the
// centering pad and returns exactly `length` samples.
inline std::vector<float> istft(const Spectrogram& s, std::size_t length) {
  const Fft fft(s.n_fft);
  const auto window = hann_window(s.n_fft);
  const std::size_t total = s.n_fft + s.hop * (s.num_frames() - 1);
  std::vector<double> acc(total, 0.0);
  std::vector<double> norm(total, 0.0);
  for (std::size_t t = 0; t < s.num_frames(); ++t) {
    const auto frame = fft.irfft(s.frames[t]);
    for (std::size_t i = 0; i < s.n_fft; ++i) {
      acc[t * s.hop + i] += frame[i] * window[i];
      norm[t * s.hop + i] += window[i] * window[i];
    }
  }
  std::vector<float> out(length, 0.0f);
  const std::size_t offset = s.n_fft / 2;
  for (std::size_t i = 0; i < length && offset + i < total; ++i) {
    const double n = norm[offset + i];
    out[i] = static_cast<float>(n > 1e-10 ? acc[offset + i] / n : acc[offset + i]);
  }
  return out;
}

}  // namespace rlda::dsp
