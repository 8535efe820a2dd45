#pragma once

#include <cmath>
#include <memory>

#include "rlda/dsp/mfcc.hpp"
#include "rlda/emotion.hpp"
#include "rlda/error.hpp"

namespace rlda::agent {

// Features are shared, never copied: the same matrix that produced an
// inference is the one that lands in replay.
using FeaturePtr = std::shared_ptr<const dsp::FeatureMatrix>;

struct Transition {
  FeaturePtr state;
  int action = 0;
  double reward = 0.0;
  FeaturePtr next_state;  // null when terminal
  bool terminal = true;

  void validate() const {
    if (!state) throw ValueError("transition has no state");
    if (action < 0 || action >= kNumEmotions) throw ValueError("transition action out of range");
    if (!std::isfinite(reward)) throw ValueError("transition reward is not finite");
    if (terminal && next_state) throw ValueError("terminal transition carries a next state");
    if (!terminal && !next_state) throw ValueError("non-terminal transition lacks a next state");
  }
};

inline FeaturePtr share(dsp::FeatureMatrix f) { return std::make_shared<const dsp::FeatureMatrix>(std::move(f)); }

}  // namespace rlda::agent
