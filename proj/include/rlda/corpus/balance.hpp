#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "rlda/corpus/manifest.hpp"
#include "rlda/dsp/vtlp.hpp"

namespace rlda::corpus {

struct BalanceOptions {
  double min_alpha = 0.9;
  double max_alpha = 1.1;
};

// Tops every class up to the largest class count with warped copies of its
// own utterances (sources taken round-robin from a shuffled order). The
// input comes first in the output, untouched.
inline std::vector<Utterance> balance_classes(const std::vector<Utterance>& train, std::uint64_t seed,
                                              const BalanceOptions& opt = {}) {
  require_labeled(train, "balancing");
  if (opt.min_alpha < dsp::kVtlpMinAlpha || opt.max_alpha > dsp::kVtlpMaxAlpha || opt.min_alpha > opt.max_alpha)
    throw ValueError("warp range must lie inside [0.8, 1.2]");
  const auto hist = label_histogram(train);
  const auto target = *std::max_element(hist.begin(), hist.end());
  for (Emotion e : kAllEmotions)
    if (hist[static_cast<std::size_t>(code(e))] == 0)
      throw ValueError("class '" + std::string(name(e)) + "' is empty; cannot balance");

  std::unordered_set<std::string> ids;
  for (const auto& u : train) ids.insert(u.id);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> alpha(opt.min_alpha, opt.max_alpha);
  std::vector<Utterance> out = train;
  for (Emotion e : kAllEmotions) {
    std::vector<const Utterance*> members;
    for (const auto& u : train)
      if (u.label == e) members.push_back(&u);
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = members.size(); k < target; ++k) {
      const Utterance& src = *members[k % members.size()];
      Utterance copy = src;
      copy.augmented = true;
      copy.warp_alpha = alpha(rng);
      for (std::size_t n = k - members.size();; ++n) {
        copy.id = src.id + "~vtlp" + std::to_string(n);
        if (ids.insert(copy.id).second) break;
      }
      out.push_back(std::move(copy));
    }
  }
  return out;
}

}  // namespace rlda::corpus
