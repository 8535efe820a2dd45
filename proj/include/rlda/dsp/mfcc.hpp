#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "rlda/dsp/stft.hpp"
#include "rlda/dsp/waveform.hpp"
#include "rlda/error.hpp"

namespace rlda::dsp {

inline constexpr std::size_t kNumMfcc = 40;
inline constexpr std::size_t kNumFrames = 87;
inline constexpr std::size_t kNfft = 2048;
inline constexpr std::size_t kHop = 512;
inline constexpr std::size_t kNumMels = 128;
inline constexpr double kPowerFloor = 1e-10;
inline constexpr double kTopDb = 80.0;

// 40 x 87 cepstral matrix: rows are coefficients, columns are frames.
class FeatureMatrix {
 public:
  static constexpr std::size_t kRows = kNumMfcc;
  static constexpr std::size_t kCols = kNumFrames;
  static constexpr std::size_t kSize = kRows * kCols;

  FeatureMatrix() : data_(kSize, 0.0f) {}
  explicit FeatureMatrix(std::vector<float> row_major) : data_(std::move(row_major)) {
    if (data_.size() != kSize) throw ValueError("feature matrix must hold 40x87 values");
  }

  float& operator()(std::size_t coef, std::size_t frame) { return data_[coef * kCols + frame]; }
  float operator()(std::size_t coef, std::size_t frame) const { return data_[coef * kCols + frame]; }

  std::span<const float> values() const { return data_; }
  std::span<float> values() { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::vector<float> data_;
};

// Slaney-style mel scale: linear below 1 kHz, logarithmic above.
inline double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz >= min_log_hz) return min_log_mel + std::log(hz / min_log_hz) / logstep;
  return hz / f_sp;
}

inline double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel >= min_log_mel) return min_log_hz * std::exp(logstep * (mel - min_log_mel));
  return f_sp * mel;
}

// Triangular filters between 0 Hz and Nyquist with area normalization
// (each filter scaled by 2 / bandwidth). Row-major n_mels x (n_fft/2+1).
inline std::vector<double> mel_filterbank(int sample_rate, std::size_t n_fft, std::size_t n_mels) {
  const std::size_t bins = n_fft / 2 + 1;
  std::vector<double> edges(n_mels + 2);
  const double lo = hz_to_mel(0.0);
  const double hi = hz_to_mel(sample_rate / 2.0);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  std::vector<double> weights(n_mels * bins, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    const double enorm = 2.0 / (right - left);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      const double rising = (f - left) / (center - left);
      const double falling = (right - f) / (right - center);
      // Filter weights are held at single precision, like the reference
      // analysis library; this keeps golden vectors comparable.
      weights[m * bins + k] = static_cast<float>(std::max(0.0, std::min(rising, falling)) * enorm);
    }
  }
  return weights;
}

// Orthonormal DCT-II basis, first n_out rows of an n_in-point transform.
inline std::vector<double> dct2_ortho(std::size_t n_out, std::size_t n_in) {
  std::vector<double> basis(n_out * n_in);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (std::size_t n = 0; n < n_in; ++n)
      basis[k * n_in + n] =
          scale * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * n + 1.0) / (2.0 * n_in));
  }
  return basis;
}

// MFCC front end: 2048-point frames every 512 samples (centered, reflect
// padded, periodic Hann), power spectrum, 128 mel bands, 10*log10 with a
// 1e-10 power floor and an 80 dB dynamic-range clamp, orthonormal DCT-II,
// first 40 coefficients.
class MfccExtractor {
 public:
  MfccExtractor()
      : mel_(mel_filterbank(kFeatureRate, kNfft, kNumMels)), dct_(dct2_ortho(kNumMfcc, kNumMels)) {}

  FeatureMatrix operator()(const Waveform& w) const {
    if (w.sample_rate_hz != kFeatureRate)
      throw ValueError("mfcc expects " + std::to_string(kFeatureRate) + " Hz audio, got " +
                       std::to_string(w.sample_rate_hz));
    const auto expected = static_cast<std::size_t>(std::llround(kClipSeconds * kFeatureRate));
    if (w.size() != expected)
      throw ValueError("mfcc expects exactly " + std::to_string(expected) + " samples, got " +
                       std::to_string(w.size()) + " (run fix_duration first)");

    const Spectrogram spec = stft(w.samples, kNfft, kHop);
    const std::size_t bins = spec.num_bins();
    const std::size_t frames = spec.num_frames();

    std::vector<double> log_mel(kNumMels * frames);
    std::vector<double> power(bins);
    double max_db = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(spec.frames[t][k]);
      for (std::size_t m = 0; m < kNumMels; ++m) {
        const double* row = &mel_[m * bins];
        double e = 0.0;
        for (std::size_t k = 0; k < bins; ++k) e += row[k] * power[k];
        const double db = 10.0 * std::log10(std::max(kPowerFloor, e));
        log_mel[m * frames + t] = db;
        max_db = std::max(max_db, db);
      }
    }
    const double clamp_db = max_db - kTopDb;
    for (double& v : log_mel) v = std::max(v, clamp_db);

    FeatureMatrix out;
    for (std::size_t c = 0; c < kNumMfcc; ++c) {
      const double* basis = &dct_[c * kNumMels];
      for (std::size_t t = 0; t < frames; ++t) {
        double acc = 0.0;
        for (std::size_t m = 0; m < kNumMels; ++m) acc += basis[m] * log_mel[m * frames + t];
        out(c, t) = static_cast<float>(acc);
      }
    }
    return out;
  }

 private:
  std::vector<double> mel_;
  std::vector<double> dct_;
};

inline FeatureMatrix mfcc(const Waveform& w) {
  static const MfccExtractor extractor;
  return extractor(w);
}

}  // namespace rlda::dsp
