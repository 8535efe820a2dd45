#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlda/dsp/wav.hpp"
#include "rlda/emotion.hpp"
#include "rlda/error.hpp"

namespace rlda::corpus {

struct Utterance {
  std::string id;
  std::filesystem::path audio_path;
  std::optional<Emotion> label;
  std::string corpus_id;
  std::optional<std::string> speaker_id;
  bool augmented = false;
  // Set on augmented copies: the audio is the referenced file warped by this factor.
  std::optional<double> warp_alpha;
};

struct Corpus {
  std::string corpus_id;
  std::vector<Utterance> utterances;
  int sample_rate_hz = dsp::kFeatureRate;
};

inline std::size_t count_label(const std::vector<Utterance>& us, Emotion e) {
  std::size_t n = 0;
  for (const auto& u : us) n += u.label == e;
  return n;
}

inline std::array<std::size_t, kNumEmotions> label_histogram(const std::vector<Utterance>& us) {
  std::array<std::size_t, kNumEmotions> h{};
  for (const auto& u : us)
    if (u.label) ++h[static_cast<std::size_t>(code(*u.label))];
  return h;
}

inline void require_labeled(const std::vector<Utterance>& us, std::string_view what) {
  for (const auto& u : us)
    if (!u.label) throw ValueError(std::string(what) + " requires labels; utterance '" + u.id + "' has none");
}

inline nlohmann::json to_record(const Utterance& u, const std::filesystem::path& base) {
  std::filesystem::path p = u.audio_path;
  if (!base.empty() && p.is_absolute()) {
    const auto rel = p.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") p = rel;
  }
  nlohmann::json j = {{"id", u.id},
                      {"path", p.generic_string()},
                      {"label", u.label ? std::string(name(*u.label)) : std::string()},
                      {"corpus_id", u.corpus_id}};
  if (u.speaker_id) j["speaker_id"] = *u.speaker_id;
  if (u.augmented) j["augmented"] = true;
  if (u.warp_alpha) j["warp_alpha"] = *u.warp_alpha;
  return j;
}

// Relative audio paths resolve against `base` (the manifest's directory).
inline Utterance from_record(const nlohmann::json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw FormatError("record is not an object");
  auto text = [&](const char* key, bool required) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) {
      if (required) throw FormatError(std::string("missing field '") + key + "'");
      return std::nullopt;
    }
    if (!j[key].is_string()) throw FormatError(std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  Utterance u;
  u.id = *text("id", true);
  if (u.id.empty()) throw FormatError("empty id");
  u.audio_path = *text("path", true);
  if (u.audio_path.is_relative()) u.audio_path = base / u.audio_path;
  u.audio_path = u.audio_path.lexically_normal();
  const auto label = text("label", false).value_or("");
  if (!label.empty()) {
    u.label = parse_emotion(label);
    if (!u.label)
      throw FormatError("unknown label '" + label + "' (expected happiness, sadness, anger or neutral)");
  }
  u.corpus_id = text("corpus_id", false).value_or("");
  u.speaker_id = text("speaker_id", false);
  if (u.speaker_id && u.speaker_id->empty()) u.speaker_id.reset();
  if (j.contains("augmented")) u.augmented = j["augmented"].get<bool>();
  if (j.contains("warp_alpha") && !j["warp_alpha"].is_null()) u.warp_alpha = j["warp_alpha"].get<double>();
  return u;
}

// One JSON object per line. Blank lines are skipped. Audio files must
// exist; the sample rate is taken from the first one.
inline Corpus load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  Corpus c;
  std::unordered_set<std::string> ids;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Utterance u;
    try {
      u = from_record(nlohmann::json::parse(line), base);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(u.id).second)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": duplicate id '" + u.id + "'");
    if (!std::filesystem::exists(u.audio_path))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": audio file not found: " +
                    u.audio_path.string());
    c.utterances.push_back(std::move(u));
  }
  if (c.utterances.empty()) throw FormatError("empty corpus: " + path.string());
  c.corpus_id = c.utterances.front().corpus_id;
  c.sample_rate_hz = dsp::load_wav(c.utterances.front().audio_path).sample_rate_hz;
  return c;
}

inline void save_manifest(const std::filesystem::path& path, const std::vector<Utterance>& utterances) {
  const auto base = std::filesystem::absolute(path).parent_path();
  if (!base.empty()) std::filesystem::create_directories(base);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& u : utterances) out << to_record(u, base).dump() << '\n';
  if (!out) throw IoError("write failed for manifest " + path.string());
}

inline void save_manifest(const std::filesystem::path& path, const Corpus& c) { save_manifest(path, c.utterances); }

}  // namespace rlda::corpus
