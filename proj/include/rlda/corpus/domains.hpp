#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "rlda/corpus/split.hpp"

namespace rlda::corpus {

enum class Scheme { Separate, Mixed50 };

inline std::string_view to_string(Scheme s) { return s == Scheme::Separate ? "separate" : "mixed50"; }

inline Scheme parse_scheme(std::string_view s) {
  if (s == "separate") return Scheme::Separate;
  if (s == "mixed50") return Scheme::Mixed50;
  throw ValueError("unknown domain scheme '" + std::string(s) + "'");
}

struct DomainAssignment {
  std::vector<Utterance> pretrain;
  std::vector<Utterance> rl;
  std::vector<Utterance> test;
  Scheme scheme = Scheme::Separate;
};

// Throws unless the three sets are pairwise disjoint by id and the test set
// has no augmented entries.
inline void check_disjoint(const DomainAssignment& d) {
  std::unordered_set<std::string> seen;
  auto add = [&](const std::vector<Utterance>& set, std::string_view what) {
    for (const auto& u : set)
      if (!seen.insert(u.id).second)
        throw ValueError("utterance '" + u.id + "' appears twice (" + std::string(what) + ")");
  };
  add(d.pretrain, "pretrain");
  add(d.rl, "rl");
  add(d.test, "test");
  for (const auto& u : d.test)
    if (u.augmented) throw ValueError("augmented utterance '" + u.id + "' in the test set");
}

// Separate: pretrain on source-train, adapt on target-train.
// Mixed50: pretrain on a random half of source-train; adapt on the other
// half plus target-train. The test set is source-test + target-test.
inline DomainAssignment compose_domains(const Split& source, const Split& target, Scheme scheme, std::uint64_t seed) {
  DomainAssignment d;
  d.scheme = scheme;
  d.test = source.test;
  d.test.insert(d.test.end(), target.test.begin(), target.test.end());
  if (scheme == Scheme::Separate) {
    d.pretrain = source.train;
    d.rl = target.train;
  } else {
    std::vector<std::size_t> order(source.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t half = source.train.size() / 2;
    std::vector<bool> to_pretrain(order.size(), false);
    for (std::size_t k = 0; k < half; ++k) to_pretrain[order[k]] = true;
    for (std::size_t i = 0; i < source.train.size(); ++i)
      (to_pretrain[i] ? d.pretrain : d.rl).push_back(source.train[i]);
    d.rl.insert(d.rl.end(), target.train.begin(), target.train.end());
  }
  check_disjoint(d);
  return d;
}

}  // namespace rlda::corpus
