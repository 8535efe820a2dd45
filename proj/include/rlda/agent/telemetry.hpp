#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>

#include "rlda/error.hpp"

namespace rlda::agent {

struct StepRecord {
  std::int64_t step = 0;
  std::int64_t episode = 0;
  double reward = 0.0;
  std::optional<double> loss;  // absent on steps without a training update
  double epsilon = 0.0;
};

inline nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step},
          {"episode", r.episode},
          {"reward", r.reward},
          {"loss", r.loss ? nlohmann::json(*r.loss) : nlohmann::json(nullptr)},
          {"epsilon", r.epsilon}};
}

// Appends one JSON object per line.
class TelemetryLog {
 public:
  explicit TelemetryLog(const std::filesystem::path& path) : out_(path, std::ios::app) {
    if (!out_) throw IoError("cannot open telemetry log " + path.string());
  }

  void record(const StepRecord& r) {
    out_ << to_json(r).dump() << '\n';
    if (++lines_ % 64 == 0) out_.flush();
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::uint64_t lines_ = 0;
};

}  // namespace rlda::agent
