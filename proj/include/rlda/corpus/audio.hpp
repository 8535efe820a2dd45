#pragma once

#include "rlda/corpus/manifest.hpp"
#include "rlda/dsp/pipeline.hpp"
#include "rlda/dsp/vtlp.hpp"

namespace rlda::corpus {

// Decoded audio of an utterance at the feature rate; augmented copies are
// warped here, so they never need files of their own.
inline dsp::Waveform load_audio(const Utterance& u) {
  auto w = dsp::resample(dsp::load_wav(u.audio_path), dsp::kFeatureRate);
  if (u.warp_alpha) w = dsp::vtlp(w, *u.warp_alpha);
  return w;
}

inline dsp::FeatureMatrix utterance_features(const Utterance& u) { return dsp::mfcc(dsp::conform(load_audio(u))); }

}  // namespace rlda::corpus
