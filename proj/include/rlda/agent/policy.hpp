#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlda/error.hpp"

namespace rlda::agent {

enum class PolicyKind { MaxBoltzmann, EpsilonGreedy, Greedy };

inline std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::MaxBoltzmann: return "max_boltzmann";
    case PolicyKind::EpsilonGreedy: return "epsilon_greedy";
    case PolicyKind::Greedy: return "greedy";
  }
  return "?";
}

inline PolicyKind parse_policy_kind(std::string_view s) {
  for (auto k : {PolicyKind::MaxBoltzmann, PolicyKind::EpsilonGreedy, PolicyKind::Greedy})
    if (to_string(k) == s) return k;
  throw ValueError("unknown policy kind '" + std::string(s) + "'");
}

// Linear decay from `start` to `end` over `decay_steps`, flat afterwards.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.1;
  std::int64_t decay_steps = 1000;

  double at(std::int64_t step) const {
    if (decay_steps <= 0 || step >= decay_steps) return end;
    if (step <= 0) return start;
    return start + (end - start) * static_cast<double>(step) / static_cast<double>(decay_steps);
  }

  void validate() const {
    if (start < 0 || start > 1 || end < 0 || end > 1) throw ValueError("epsilon must lie in [0, 1]");
    if (end > start) throw ValueError("epsilon schedule must be non-increasing");
  }
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::MaxBoltzmann;
  double temperature = 1.0;
  EpsilonSchedule epsilon;

  void validate() const {
    if (!(temperature > 0) || !std::isfinite(temperature)) throw ValueError("temperature must be positive");
    epsilon.validate();
  }
};

// Lowest index wins ties.
template <typename T>
int greedy_action(std::span<const T> q) {
  if (q.empty()) throw ValueError("empty q-vector");
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

template <typename T>
std::vector<double> boltzmann_probabilities(std::span<const T> q, double temperature) {
  if (q.empty()) throw ValueError("empty q-vector");
  const double top = static_cast<double>(*std::max_element(q.begin(), q.end()));
  std::vector<double> p(q.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) sum += p[i] = std::exp((static_cast<double>(q[i]) - top) / temperature);
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T, typename Urbg>
int boltzmann_sample(std::span<const T> q, double temperature, Urbg& rng) {
  const auto p = boltzmann_probabilities(q, temperature);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (u < p[i]) return static_cast<int>(i);
    u -= p[i];
  }
  return static_cast<int>(p.size() - 1);
}

// epsilon is the current value of the schedule; Greedy ignores it.
template <typename T, typename Urbg>
int select_action(const PolicyConfig& policy, std::span<const T> q, double epsilon, Urbg& rng) {
  for (T v : q)
    if (!std::isfinite(static_cast<double>(v))) throw ValueError("non-finite q-value");
  if (policy.kind == PolicyKind::Greedy || epsilon <= 0.0) return greedy_action(q);
  const bool explore = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon;
  if (!explore) return greedy_action(q);
  if (policy.kind == PolicyKind::EpsilonGreedy)
    return std::uniform_int_distribution<int>(0, static_cast<int>(q.size()) - 1)(rng);
  return boltzmann_sample(q, policy.temperature, rng);
}

}  // namespace rlda::agent
