#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "rlda/dsp/stft.hpp"
#include "rlda/dsp/waveform.hpp"
#include "rlda/error.hpp"

namespace rlda::dsp {

inline constexpr double kVtlpMinAlpha = 0.8;
inline constexpr double kVtlpMaxAlpha = 1.2;

// Piecewise-linear frequency warp: f -> alpha * f below the boundary
// cutoff * min(alpha, 1) / alpha, then a straight line that pins Nyquist.
class VtlpWarp {
 public:
  VtlpWarp(double alpha, double nyquist, double cutoff_hz = 4800.0)
      : alpha_(alpha), nyquist_(nyquist), knee_out_(cutoff_hz * std::min(alpha, 1.0)),
        knee_in_(knee_out_ / alpha) {
    if (!(knee_in_ < nyquist_)) throw ValueError("vtlp cutoff must lie below Nyquist");
  }

  double forward(double f) const {
    if (f <= knee_in_) return alpha_ * f;
    return nyquist_ - (nyquist_ - knee_out_) / (nyquist_ - knee_in_) * (nyquist_ - f);
  }

  double inverse(double f) const {
    if (f <= knee_out_) return f / alpha_;
    return nyquist_ - (nyquist_ - f) * (nyquist_ - knee_in_) / (nyquist_ - knee_out_);
  }

 private:
  double alpha_, nyquist_, knee_out_, knee_in_;
};

struct VtlpOptions {
  std::size_t n_fft = 2048;
  std::size_t hop = 512;
  double cutoff_hz = 4800.0;
};

// Vocal tract length perturbation on the waveform. Each output STFT bin takes
// the magnitude found at the inverse-warped source frequency and a phase
// advanced at the warped instantaneous frequency (phase-vocoder style), so a
// partial at f comes out at warp(f). The result is resynthesized with the
// same length as the input.
inline Waveform vtlp(const Waveform& w, double alpha, const VtlpOptions& opt = {}) {
  if (!(alpha >= kVtlpMinAlpha && alpha <= kVtlpMaxAlpha))
    throw ValueError("vtlp: warp factor must lie in [0.8, 1.2]");
  validate(w);

  const Spectrogram in = stft(w.samples, opt.n_fft, opt.hop);
  const std::size_t bins = in.num_bins();
  const std::size_t frames = in.num_frames();
  const double bin_hz = static_cast<double>(w.sample_rate_hz) / static_cast<double>(opt.n_fft);
  const double nyquist = w.sample_rate_hz / 2.0;
  const VtlpWarp warp(alpha, nyquist, opt.cutoff_hz);
  const double two_pi = 2.0 * std::numbers::pi;
  const double hop = static_cast<double>(opt.hop);

  // Source position (fractional bin) for every output bin.
  std::vector<std::size_t> src_lo(bins);
  std::vector<double> src_frac(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    double b = warp.inverse(static_cast<double>(k) * bin_hz) / bin_hz;
    if (std::abs(b - std::round(b)) < 1e-9) b = std::round(b);
    b = std::clamp(b, 0.0, static_cast<double>(bins - 1));
    src_lo[k] = std::min(static_cast<std::size_t>(b), bins - 1);
    src_frac[k] = b - static_cast<double>(src_lo[k]);
  }

  // Instantaneous frequency (rad/sample) per source bin.
  std::vector<double> inst(bins);
  std::vector<double> prev_phase(bins);
  std::vector<double> out_phase(bins);
  double energy_in = 0.0;
  double energy_target = 0.0;
  Spectrogram out{opt.n_fft, opt.hop, {}};
  out.frames.assign(frames, std::vector<std::complex<double>>(bins));

  for (std::size_t t = 0; t < frames; ++t) {
    const auto& frame = in.frames[t];
    for (std::size_t j = 0; j < bins; ++j) {
      const double bin_omega = two_pi * static_cast<double>(j) / static_cast<double>(opt.n_fft);
      const double phase = std::arg(frame[j]);
      if (t == 0) {
        inst[j] = bin_omega;
      } else {
        double dev = phase - prev_phase[j] - bin_omega * hop;
        dev -= two_pi * std::round(dev / two_pi);
        inst[j] = bin_omega + dev / hop;
      }
      prev_phase[j] = phase;
    }
    for (std::size_t k = 0; k < bins; ++k) {
      const std::size_t lo = src_lo[k];
      const std::size_t hi = std::min(lo + 1, bins - 1);
      const double f = src_frac[k];
      const double mag = (1.0 - f) * std::abs(frame[lo]) + f * std::abs(frame[hi]);
      if (t == 0) {
        out_phase[k] = std::arg(frame[f < 0.5 ? lo : hi]);
      } else {
        const double src_omega = (1.0 - f) * inst[lo] + f * inst[hi];
        const double src_hz = src_omega / two_pi * w.sample_rate_hz;
        const double dst_omega = warp.forward(std::clamp(src_hz, 0.0, nyquist)) / w.sample_rate_hz * two_pi;
        // Keep bins exactly on the identity map bit-faithful to the input phase.
        out_phase[k] += (alpha == 1.0 ? src_omega : dst_omega) * hop;
      }
      out.frames[t][k] = std::polar(mag, out_phase[k]);
      energy_in += std::norm(frame[k]);
      energy_target += mag * mag;
    }
  }
  Waveform result{istft(out, w.size()), w.sample_rate_hz};
  // Overlap-add of frames with incoherent phases (noise) loses energy; scale
  // so the waveform energy follows the warped magnitude spectrum.
  const double wave_in = rms(w), wave_out = rms(result);
  if (alpha != 1.0 && energy_in > 0.0 && wave_out > 0.0) {
    const double scale = wave_in / wave_out * std::sqrt(energy_target / energy_in);
    for (auto& s : result.samples) s = static_cast<float>(s * scale);
  }
  return result;
}

}  // namespace rlda::dsp
