#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "rlda/dsp/waveform.hpp"
#include "rlda/error.hpp"

namespace rlda::dsp {

namespace detail {

// Zeroth-order modified Bessel function of the first kind (power series).
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace detail

struct ResampleOptions {
  int zero_crossings = 32;     // half-width of the interpolation kernel, in output-band zero crossings
  double rolloff = 0.945;      // cutoff as a fraction of the lower Nyquist
  double kaiser_beta = 8.6;
};

// Band-limited resampling by direct Kaiser-windowed sinc interpolation.
// Output length is round(len * target / source); same-rate input is
// returned untouched.
inline Waveform resample(const Waveform& w, int target_hz, const ResampleOptions& opt = {}) {
  if (target_hz <= 0) throw ValueError("resample: target rate must be positive");
  if (w.sample_rate_hz <= 0) throw ValueError("resample: source rate must be positive");
  if (target_hz == w.sample_rate_hz) return w;

  const double ratio = static_cast<double>(target_hz) / w.sample_rate_hz;
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(w.size()) * ratio));
  const double cutoff = std::min(1.0, ratio) * opt.rolloff;  // cycles per input sample * 2
  const double half_width = opt.zero_crossings / cutoff;     // in input samples
  const double i0_beta = detail::bessel_i0(opt.kaiser_beta);
  // Kaiser window tabulated over |r| in [0, 1], linearly interpolated.
  constexpr std::size_t kTable = 4096;
  std::vector<double> kaiser(kTable + 2);
  for (std::size_t i = 0; i <= kTable + 1; ++i) {
    const double r = std::min(1.0, static_cast<double>(i) / kTable);
    kaiser[i] = detail::bessel_i0(opt.kaiser_beta * std::sqrt(1.0 - r * r)) / i0_beta;
  }
  const auto n_in = static_cast<std::ptrdiff_t>(w.size());

  Waveform out{std::vector<float>(out_len), target_hz};
  for (std::size_t m = 0; m < out_len; ++m) {
    const double t = static_cast<double>(m) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double d = t - static_cast<double>(k);
      const double pos = std::abs(d) / half_width * kTable;
      const auto idx = std::min(static_cast<std::size_t>(pos), kTable);
      const double frac = pos - static_cast<double>(idx);
      const double win = kaiser[idx] + frac * (kaiser[idx + 1] - kaiser[idx]);
      acc += w.samples[static_cast<std::size_t>(k)] * cutoff * detail::sinc(cutoff * d) * win;
    }
    out.samples[m] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace rlda::dsp
