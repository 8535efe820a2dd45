#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlda/dsp/wav.hpp"
#include "rlda/error.hpp"
#include "rlda/nn/adam.hpp"
#include "rlda/nn/architecture.hpp"
#include "rlda/nn/qnetwork.hpp"

namespace rlda::nn {

// Checkpoint container, all integers little-endian:
//
//   magic        8 bytes  "RLDACKPT"
//   version      u32      kCheckpointVersion
//   arch hash    u64      FNV-1a of the descriptor below
//   descriptor   u32 length + ASCII   (Architecture::describe())
//   metadata     u32 length + UTF-8 JSON object
//   tensor count u32
//   directory    per tensor: u16 name length, name, u8 rank, u32 dims[rank],
//                u64 byte offset into the payload
//   payload size u64
//   payload      float32 tensors, row-major, back to back
//   checksum     u64 FNV-1a over every preceding byte
//
// Optimizer moments, when present, are tensors named "adam.m/<param>" and
// "adam.v/<param>"; their hyperparameters and step count live in metadata.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'R', 'L', 'D', 'A', 'C', 'K', 'P', 'T'};

struct CheckpointMeta {
  std::string stage = "init";  // "init", "pretrained", "rl", "online", ...
  std::string head = "linear"; // "linear" (Q-values) or "softmax" (pre-training view)
  std::int64_t step = 0;
  std::int64_t model_version = 0;
  nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
  CheckpointMeta meta;
  QNet net;
  std::optional<Adam<float>> optimizer;
};

namespace detail {

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
 public:
  template <typename U>
  void put(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
  }
  void put_bytes(std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }
  void put_f32(float f) { put(std::bit_cast<std::uint32_t>(f)); }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes(b) {}
  template <typename U>
  U get() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
    pos += sizeof(U);
    return static_cast<U>(v);
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw FormatError("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

struct TensorEntry {
  std::string name;
  const Matrix<float>* data;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_checkpoint(const QNet& net, const Adam<float>* optimizer,
                                                      const CheckpointMeta& meta) {
  std::vector<detail::TensorEntry> tensors;
  for (const auto* p : net.parameters()) tensors.push_back({p->name, &p->value});
  nlohmann::json meta_json = {{"stage", meta.stage},
                              {"head", meta.head},
                              {"step", meta.step},
                              {"model_version", meta.model_version},
                              {"extra", meta.extra}};
  if (optimizer && optimizer->steps() > 0) {
    const auto& cfg = optimizer->config();
    meta_json["adam"] = {{"step", optimizer->steps()},
                         {"learning_rate", cfg.learning_rate},
                         {"beta1", cfg.beta1},
                         {"beta2", cfg.beta2},
                         {"epsilon", cfg.epsilon}};
    for (std::size_t i = 0; i < optimizer->names().size(); ++i) {
      tensors.push_back({"adam.m/" + optimizer->names()[i], &optimizer->first_moments()[i]});
      tensors.push_back({"adam.v/" + optimizer->names()[i], &optimizer->second_moments()[i]});
    }
  }

  detail::Writer w;
  w.put_bytes(std::string_view(kCheckpointMagic, 8));
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string desc = net.architecture().describe();
  w.put<std::uint64_t>(net.architecture().hash());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(desc.size()));
  w.put_bytes(desc);
  const std::string meta_text = meta_json.dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(meta_text.size()));
  w.put_bytes(meta_text);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.put_bytes(t.name);
    w.put<std::uint8_t>(2);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.data->rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.data->cols()));
    w.put<std::uint64_t>(offset);
    offset += static_cast<std::uint64_t>(t.data->size()) * 4;
  }
  w.put<std::uint64_t>(offset);
  for (const auto& t : tensors)
    for (Eigen::Index i = 0; i < t.data->size(); ++i) w.put_f32(t.data->data()[i]);
  w.put<std::uint64_t>(detail::fnv1a(w.out));
  return std::move(w.out);
}

// Parses into fresh objects; nothing outside is touched unless the whole
// file validates.
inline Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 + 4 + 8) throw FormatError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw FormatError("not a checkpoint (bad magic)");
  {
    detail::Reader tail(bytes.subspan(bytes.size() - 8));
    const auto stored = tail.get<std::uint64_t>();
    if (stored != detail::fnv1a(bytes.first(bytes.size() - 8))) throw FormatError("checkpoint checksum mismatch (corrupt or truncated file)");
  }
  detail::Reader r(bytes.first(bytes.size() - 8));
  r.pos = 8;
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto hash = r.get<std::uint64_t>();
  const std::string desc = r.get_string(r.get<std::uint32_t>());
  const Architecture arch = Architecture::parse(desc);
  if (arch.hash() != hash) throw FormatError("architecture hash does not match descriptor");
  const std::string meta_text = r.get_string(r.get<std::uint32_t>());
  nlohmann::json meta_json;
  try {
    meta_json = nlohmann::json::parse(meta_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }

  struct Dir {
    std::string name;
    std::uint32_t rows, cols;
    std::uint64_t offset;
  };
  const auto count = r.get<std::uint32_t>();
  std::vector<Dir> dir;
  dir.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Dir d;
    d.name = r.get_string(r.get<std::uint16_t>());
    const auto rank = r.get<std::uint8_t>();
    if (rank < 1 || rank > 2) throw FormatError("tensor '" + d.name + "' has unsupported rank");
    d.rows = rank == 2 ? r.get<std::uint32_t>() : 1;
    d.cols = r.get<std::uint32_t>();
    d.offset = r.get<std::uint64_t>();
    dir.push_back(std::move(d));
  }
  const auto payload_size = r.get<std::uint64_t>();
  const std::size_t payload_start = r.pos;
  r.need(payload_size);
  if (r.pos + payload_size != r.bytes.size()) throw FormatError("checkpoint payload size mismatch");

  auto read_tensor = [&](const Dir& d) {
    Matrix<float> m(d.rows, d.cols);
    const std::uint64_t nbytes = static_cast<std::uint64_t>(d.rows) * d.cols * 4;
    if (d.offset + nbytes > payload_size) throw FormatError("tensor '" + d.name + "' exceeds payload");
    detail::Reader tr(r.bytes);
    tr.pos = payload_start + d.offset;
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = tr.get_f32();
    return m;
  };
  auto find = [&](const std::string& name) -> const Dir* {
    for (const auto& d : dir)
      if (d.name == name) return &d;
    return nullptr;
  };

  Checkpoint ck{{}, QNet(arch), std::nullopt};
  for (auto* p : ck.net.parameters()) {
    const Dir* d = find(p->name);
    if (!d) throw FormatError("checkpoint is missing tensor '" + p->name + "'");
    if (d->rows != p->value.rows() || d->cols != p->value.cols())
      throw FormatError("tensor '" + p->name + "' has the wrong shape");
    p->value = read_tensor(*d);
  }
  try {
    ck.meta.stage = meta_json.at("stage").get<std::string>();
    ck.meta.head = meta_json.at("head").get<std::string>();
    ck.meta.step = meta_json.at("step").get<std::int64_t>();
    ck.meta.model_version = meta_json.at("model_version").get<std::int64_t>();
    ck.meta.extra = meta_json.value("extra", nlohmann::json::object());
    if (meta_json.contains("adam")) {
      const auto& a = meta_json["adam"];
      AdamConfig cfg{a.at("learning_rate").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
                     a.at("epsilon").get<double>()};
      std::vector<std::string> names;
      std::vector<Matrix<float>> m, v;
      for (auto* p : ck.net.trainable_parameters()) {
        const Dir* dm = find("adam.m/" + p->name);
        const Dir* dv = find("adam.v/" + p->name);
        if (!dm || !dv) throw FormatError("checkpoint optimizer state is missing '" + p->name + "'");
        names.push_back(p->name);
        m.push_back(read_tensor(*dm));
        v.push_back(read_tensor(*dv));
      }
      Adam<float> opt(cfg);
      opt.restore(a.at("step").get<std::int64_t>(), std::move(names), std::move(m), std::move(v));
      ck.optimizer = std::move(opt);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  return ck;
}

// Writes to a sibling temp file and renames, so readers never observe a
// half-written checkpoint.
inline void save_checkpoint(const std::filesystem::path& path, const QNet& net, const Adam<float>* optimizer,
                            const CheckpointMeta& meta) {
  const auto bytes = serialize_checkpoint(net, optimizer, meta);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  dsp::write_file_bytes(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = dsp::read_file_bytes(path);
  try {
    return deserialize_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace rlda::nn
