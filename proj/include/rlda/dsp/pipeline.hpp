#pragma once

#include <cstdint>
#include <span>

#include "rlda/dsp/mfcc.hpp"
#include "rlda/dsp/resample.hpp"
#include "rlda/dsp/wav.hpp"
#include "rlda/dsp/waveform.hpp"

namespace rlda::dsp {

// Any waveform -> the fixed 22050 Hz, 2.0 s clip the feature extractor expects.
inline Waveform conform(const Waveform& w) {
  validate(w);
  return fix_duration(resample(w, kFeatureRate), kClipSeconds);
}

// resample -> fix_duration -> mfcc
inline FeatureMatrix extract_features(const Waveform& w) { return mfcc(conform(w)); }

inline FeatureMatrix extract_features(std::span<const std::uint8_t> wav_bytes) {
  return extract_features(decode_wav(wav_bytes));
}

}  // namespace rlda::dsp
