#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "rlda/error.hpp"

namespace rlda::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path checkpoint_path = "service/model.ckpt";  // written on publish, read on restart
  std::filesystem::path base_checkpoint;                          // first start when checkpoint_path is absent
  int feedback_timeout_s = 300;
  std::size_t queue_capacity = 4096;
  std::size_t replay_threshold = 128;  // replay size before training starts
  std::int64_t train_every = 1;        // judged feedbacks per training step
  std::int64_t publish_period = 50;    // training steps per published snapshot + checkpoint
  std::size_t batch_size = 128;
  std::size_t replay_capacity = 10000;
  std::int64_t target_sync = 500;
  double gamma = 0.9;
  double learning_rate = 2.5e-4;
  std::size_t max_upload_bytes = 10 * 1024 * 1024;
  std::size_t rolling_window = 100;
  std::uint64_t seed = 1;
  bool keep_audio = false;  // debug: keep uploads under <checkpoint dir>/uploads

  void validate() const {
    if (port < 0 || port > 65535) throw ValueError("port out of range");
    if (feedback_timeout_s <= 0) throw ValueError("feedback timeout must be positive");
    if (train_every <= 0 || publish_period <= 0) throw ValueError("trainer cadences must be positive");
    if (queue_capacity == 0 || batch_size == 0 || rolling_window == 0) throw ValueError("sizes must be positive");
    if (replay_capacity < batch_size) throw ValueError("replay capacity is smaller than the batch size");
    if (checkpoint_path.empty()) throw ValueError("checkpoint path is required");
  }
};

inline void apply_json(ServiceConfig& c, const nlohmann::json& j) {
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (j.contains("checkpoint_path")) c.checkpoint_path = j["checkpoint_path"].get<std::string>();
    if (j.contains("base_checkpoint")) c.base_checkpoint = j["base_checkpoint"].get<std::string>();
    c.feedback_timeout_s = j.value("feedback_timeout_s", c.feedback_timeout_s);
    c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
    c.replay_threshold = j.value("replay_threshold", c.replay_threshold);
    c.train_every = j.value("train_every", c.train_every);
    c.publish_period = j.value("publish_period", c.publish_period);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
    c.target_sync = j.value("target_sync", c.target_sync);
    c.gamma = j.value("gamma", c.gamma);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.max_upload_bytes = j.value("max_upload_bytes", c.max_upload_bytes);
    c.rolling_window = j.value("rolling_window", c.rolling_window);
    c.seed = j.value("seed", c.seed);
    c.keep_audio = j.value("keep_audio", c.keep_audio);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("service config: ") + e.what());
  }
}

inline ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open service config " + path.string());
  ServiceConfig c;
  try {
    apply_json(c, nlohmann::json::parse(in, nullptr, true, true));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return c;
}

inline constexpr const char* kEnvPrefix = "RLDA_";

// Every field can be overridden by RLDA_<FIELD IN UPPER CASE>, e.g.
// RLDA_PORT=9000 or RLDA_CHECKPOINT_PATH=/var/lib/rlda/model.ckpt.
// `getenv` is injectable for tests.
inline void apply_env(ServiceConfig& c,
                      const std::function<const char*(const char*)>& getenv = [](const char* k) { return std::getenv(k); }) {
  const char* keys[] = {"host", "port", "checkpoint_path", "base_checkpoint", "feedback_timeout_s", "queue_capacity",
                        "replay_threshold", "train_every", "publish_period", "batch_size", "replay_capacity",
                        "target_sync", "gamma", "learning_rate", "max_upload_bytes", "rolling_window", "seed",
                        "keep_audio"};
  nlohmann::json j = nlohmann::json::object();
  for (const char* key : keys) {
    std::string var = kEnvPrefix;
    for (const char* p = key; *p; ++p) var += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
    const char* v = getenv(var.c_str());
    if (!v) continue;
    const std::string text = v;
    const std::string k = key;
    if (k == "host" || k == "checkpoint_path" || k == "base_checkpoint") {
      j[k] = text;
    } else if (k == "keep_audio") {
      j[k] = text == "1" || text == "true" || text == "yes";
    } else {
      try {
        j[k] = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error&) {
        throw ValueError("environment variable " + var + " is not a number: '" + text + "'");
      }
      if (!j[k].is_number()) throw ValueError("environment variable " + var + " is not a number: '" + text + "'");
    }
  }
  apply_json(c, j);
}

}  // namespace rlda::service
