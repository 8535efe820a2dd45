#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rlda/corpus/manifest.hpp"

namespace rlda::corpus {

struct Split {
  std::vector<Utterance> train;
  std::vector<Utterance> test;
};

// Per-class test count: max(1, round(count * fraction)), never the whole class.
inline std::size_t stratified_test_count(std::size_t class_count, double fraction) {
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(class_count) * fraction));
  return std::min(std::max<std::size_t>(1, n), class_count - 1);
}

namespace detail {

inline std::vector<Utterance> pick(const std::vector<Utterance>& all, const std::vector<bool>& mask, bool value) {
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (mask[i] == value) out.push_back(all[i]);
  return out;
}

}  // namespace detail

// Stratified by label. Both halves keep the corpus order.
inline Split split_corpus(const std::vector<Utterance>& utterances, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0 && test_fraction < 1)) throw ValueError("test fraction must lie in (0, 1)");
  require_labeled(utterances, "split");
  std::mt19937_64 rng(seed);
  std::vector<bool> in_test(utterances.size(), false);
  for (Emotion e : kAllEmotions) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < utterances.size(); ++i)
      if (utterances[i].label == e) members.push_back(i);
    if (members.empty()) continue;
    if (members.size() < 2)
      throw ValueError("class '" + std::string(name(e)) + "' has fewer than 2 utterances; cannot stratify");
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = stratified_test_count(members.size(), test_fraction);
    for (std::size_t k = 0; k < n; ++k) in_test[members[k]] = true;
  }
  return {detail::pick(utterances, in_test, false), detail::pick(utterances, in_test, true)};
}

inline Split split_corpus(const Corpus& c, double test_fraction, std::uint64_t seed) {
  return split_corpus(c.utterances, test_fraction, seed);
}

// Speaker-disjoint variant: whole speakers move to test until the test side
// holds round(total * fraction) utterances. Not stratified.
inline Split split_by_speaker(const std::vector<Utterance>& utterances, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0 && test_fraction < 1)) throw ValueError("test fraction must lie in (0, 1)");
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (!utterances[i].speaker_id) throw ValueError("utterance '" + utterances[i].id + "' has no speaker id");
    by_speaker[*utterances[i].speaker_id].push_back(i);
  }
  if (by_speaker.size() < 2) throw ValueError("speaker split needs at least 2 speakers");
  std::vector<std::string> speakers;
  for (const auto& [s, _] : by_speaker) speakers.push_back(s);
  std::mt19937_64 rng(seed);
  std::shuffle(speakers.begin(), speakers.end(), rng);
  const auto want = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(utterances.size()) * test_fraction)));
  std::vector<bool> in_test(utterances.size(), false);
  std::size_t taken = 0;
  for (std::size_t k = 0; k + 1 < speakers.size() && taken < want; ++k) {
    for (auto i : by_speaker[speakers[k]]) in_test[i] = true;
    taken += by_speaker[speakers[k]].size();
  }
  return {detail::pick(utterances, in_test, false), detail::pick(utterances, in_test, true)};
}

}  // namespace rlda::corpus
