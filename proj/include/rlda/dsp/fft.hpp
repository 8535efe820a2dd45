#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "rlda/error.hpp"

namespace rlda::dsp {

// Iterative radix-2 complex FFT with precomputed twiddles and bit-reversal
// table. Sizes must be powers of two.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n), rev_(n), twiddle_(n / 2) {
    if (n < 2 || (n & (n - 1)) != 0) throw ValueError("FFT size must be a power of two >= 2");
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      rev_[i] = r;
    }
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
  }

  std::size_t size() const { return n_; }

  // Unnormalized forward transform (e^{-i...}); inverse divides by n.
  void transform(std::span<std::complex<double>> x, bool inverse = false) const {
    if (x.size() != n_) throw ValueError("FFT input has wrong length");
    for (std::size_t i = 0; i < n_; ++i)
      if (i < rev_[i]) std::swap(x[i], x[rev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t i = 0; i < n_; i += len) {
        for (std::size_t k = 0; k < half; ++k) {
          std::complex<double> w = twiddle_[k * stride];
          if (inverse) w = std::conj(w);
          const std::complex<double> t = w * x[i + k + half];
          x[i + k + half] = x[i + k] - t;
          x[i + k] += t;
        }
      }
    }
    if (inverse) {
      const double scale = 1.0 / static_cast<double>(n_);
      for (auto& v : x) v *= scale;
    }
  }

  // Real input of length n -> n/2 + 1 non-negative-frequency bins.
  std::vector<std::complex<double>> rfft(std::span<const double> x) const {
    if (x.size() != n_) throw ValueError("rfft input has wrong length");
    std::vector<std::complex<double>> buf(x.begin(), x.end());
    transform(buf);
    buf.resize(n_ / 2 + 1);
    return buf;
  }

  // Inverse of rfft. Imaginary parts of the DC and Nyquist bins are ignored.
  std::vector<double> irfft(std::span<const std::complex<double>> spec) const {
    if (spec.size() != n_ / 2 + 1) throw ValueError("irfft input has wrong length");
    std::vector<std::complex<double>> buf(n_);
    buf[0] = spec[0].real();
    buf[n_ / 2] = spec[n_ / 2].real();
    for (std::size_t k = 1; k < n_ / 2; ++k) {
      buf[k] = spec[k];
      buf[n_ - k] = std::conj(spec[k]);
    }
    transform(buf, true);
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = buf[i].real();
    return out;
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> rev_;
  std::vector<std::complex<double>> twiddle_;
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace rlda::dsp
