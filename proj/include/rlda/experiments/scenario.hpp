#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlda/agent/dqn.hpp"
#include "rlda/agent/policy.hpp"
#include "rlda/corpus/synthetic.hpp"
#include "rlda/error.hpp"
#include "rlda/experiments/supervised.hpp"
#include "rlda/nn/architecture.hpp"

namespace rlda::experiments {

enum class Scheme { Separate, Mixed50, LiveFeed, LiveFeedNoise };
enum class Method { RlDa, SlDa };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Separate: return "separate";
    case Scheme::Mixed50: return "mixed50";
    case Scheme::LiveFeed: return "live_feed";
    case Scheme::LiveFeedNoise: return "live_feed_noise";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "separate") return Scheme::Separate;
  if (s == "mixed50") return Scheme::Mixed50;
  if (s == "live_feed") return Scheme::LiveFeed;
  if (s == "live_feed_noise") return Scheme::LiveFeedNoise;
  throw ValueError("unknown scheme '" + std::string(s) + "'");
}

inline std::string_view to_string(Method m) { return m == Method::RlDa ? "rl_da" : "sl_da"; }

inline Method parse_method(std::string_view s) {
  if (s == "rl_da") return Method::RlDa;
  if (s == "sl_da") return Method::SlDa;
  throw ValueError("unknown method '" + std::string(s) + "'");
}

// A corpus is either an existing JSONL manifest or a synthetic spec that the
// runner generates into the output directory.
struct CorpusRef {
  std::optional<std::filesystem::path> manifest;
  std::optional<corpus::SyntheticSpec> synthetic;

  std::string describe() const {
    if (manifest) return manifest->string();
    return synthetic ? synthetic->corpus_id : std::string("<none>");
  }
};

struct RlConfig {
  std::int64_t steps = 5000;
  double epsilon_decay_fraction = 0.2;  // share of the budget over which epsilon decays
  std::size_t episode_length = 256;
  double snr_db = -5.0;
  bool telemetry = true;
};

struct ScenarioConfig {
  std::string name = "scenario";
  CorpusRef source;
  CorpusRef target;
  std::optional<CorpusRef> noise;
  Scheme scheme = Scheme::Separate;
  std::vector<Method> methods{Method::RlDa, Method::SlDa};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double test_fraction = 0.2;
  bool balance = true;
  nn::Architecture architecture;
  SupervisedConfig pretrain;
  SupervisedConfig fine_tune;  // supervised adaptation for sl_da on separate / mixed50
  RlConfig rl;
  agent::AgentConfig agent;
  agent::PolicyConfig policy;
  std::filesystem::path output_dir = "runs";

  void validate() const {
    if (!source.manifest && !source.synthetic) throw ValueError("scenario: source corpus missing");
    if (!target.manifest && !target.synthetic) throw ValueError("scenario: target corpus missing");
    if (scheme == Scheme::LiveFeedNoise && !noise) throw ValueError("scenario: live_feed_noise requires a noise corpus");
    if (seeds.empty()) throw ValueError("scenario: at least one seed is required");
    if (methods.empty()) throw ValueError("scenario: at least one method is required");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValueError("scenario: test_fraction must be in (0, 1)");
    if (rl.steps < 0) throw ValueError("scenario: rl steps must be non-negative");
    if (rl.epsilon_decay_fraction < 0.0 || rl.epsilon_decay_fraction > 1.0)
      throw ValueError("scenario: epsilon_decay_fraction must be in [0, 1]");
    if (rl.episode_length == 0) throw ValueError("scenario: episode_length must be positive");
    if (pretrain.epochs < 0 || fine_tune.epochs < 0) throw ValueError("scenario: epochs must be non-negative");
    architecture.validate();
    policy.validate();
  }

  // Epsilon decays over the configured share of the RL budget.
  agent::PolicyConfig effective_policy() const {
    auto p = policy;
    p.epsilon.decay_steps = std::max<std::int64_t>(
        1, std::llround(rl.epsilon_decay_fraction * static_cast<double>(rl.steps)));
    return p;
  }
};

namespace detail {

inline CorpusRef parse_corpus_ref(const nlohmann::json& j, const std::filesystem::path& base, std::string_view what) {
  CorpusRef r;
  if (j.is_string()) {
    r.manifest = base / j.get<std::string>();
  } else if (j.is_object() && j.contains("manifest")) {
    r.manifest = base / j["manifest"].get<std::string>();
  } else if (j.is_object() && j.contains("synthetic")) {
    const auto& s = j["synthetic"];
    if (s.is_string()) {
      const auto path = base / s.get<std::string>();
      std::ifstream in(path);
      if (!in) throw IoError("cannot open synthetic spec " + path.string());
      r.synthetic = corpus::parse_synthetic_spec(nlohmann::json::parse(in, nullptr, true, true));
    } else {
      r.synthetic = corpus::parse_synthetic_spec(s);
    }
  } else {
    throw ValueError("scenario: " + std::string(what) + " must name a manifest or a synthetic spec (inline or file)");
  }
  return r;
}

inline void parse_supervised(const nlohmann::json& j, SupervisedConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
}

inline void parse_architecture(const nlohmann::json& j, nn::Architecture& a) {
  a.conv1_filters = j.value("conv1_filters", a.conv1_filters);
  a.conv2_filters = j.value("conv2_filters", a.conv2_filters);
  a.lstm_units = j.value("lstm_units", a.lstm_units);
  a.dense_units = j.value("dense_units", a.dense_units);
  a.dropout = j.value("dropout", a.dropout);
}

}  // namespace detail

// Relative paths (manifests, output_dir) resolve against `base`.
inline ScenarioConfig parse_scenario(const nlohmann::json& j, const std::filesystem::path& base = ".") {
  ScenarioConfig c;
  try {
    c.name = j.value("name", c.name);
    c.source = detail::parse_corpus_ref(j.at("source"), base, "source");
    c.target = detail::parse_corpus_ref(j.at("target"), base, "target");
    if (j.contains("noise") && !j["noise"].is_null()) c.noise = detail::parse_corpus_ref(j["noise"], base, "noise");
    c.scheme = parse_scheme(j.value("scheme", std::string("separate")));
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j["methods"]) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.balance = j.value("balance", c.balance);
    if (j.contains("architecture")) detail::parse_architecture(j["architecture"], c.architecture);
    if (j.contains("pretrain")) detail::parse_supervised(j["pretrain"], c.pretrain);
    c.fine_tune = c.pretrain;
    if (j.contains("fine_tune")) detail::parse_supervised(j["fine_tune"], c.fine_tune);
    if (j.contains("rl")) {
      const auto& r = j["rl"];
      c.rl.steps = r.value("steps", c.rl.steps);
      c.rl.epsilon_decay_fraction = r.value("epsilon_decay_fraction", c.rl.epsilon_decay_fraction);
      c.rl.episode_length = r.value("episode_length", c.rl.episode_length);
      c.rl.snr_db = r.value("snr_db", c.rl.snr_db);
      c.rl.telemetry = r.value("telemetry", c.rl.telemetry);
    }
    if (j.contains("agent")) {
      const auto& a = j["agent"];
      c.agent.gamma = a.value("gamma", c.agent.gamma);
      c.agent.batch_size = a.value("batch_size", c.agent.batch_size);
      c.agent.replay_capacity = a.value("replay_capacity", c.agent.replay_capacity);
      c.agent.target_sync = a.value("target_sync", c.agent.target_sync);
      c.agent.train_start = a.value("train_start", c.agent.batch_size);
      c.agent.steps_per_update = a.value("steps_per_update", c.agent.steps_per_update);
      c.agent.freeze_batch_norm = a.value("freeze_batch_norm", c.agent.freeze_batch_norm);
      c.agent.adam.learning_rate = a.value("learning_rate", c.agent.adam.learning_rate);
    }
    if (j.contains("policy")) {
      const auto& p = j["policy"];
      c.policy.kind = agent::parse_policy_kind(p.value("kind", std::string(agent::to_string(c.policy.kind))));
      c.policy.temperature = p.value("temperature", c.policy.temperature);
      c.policy.epsilon.start = p.value("epsilon_start", c.policy.epsilon.start);
      c.policy.epsilon.end = p.value("epsilon_end", c.policy.epsilon.end);
    }
    c.output_dir = base / j.value("output_dir", c.output_dir.string());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

// JSON with // and /* */ comments allowed.
inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return parse_scenario(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace rlda::experiments
