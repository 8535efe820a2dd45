#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "rlda/dsp/waveform.hpp"
#include "rlda/error.hpp"

namespace rlda::dsp {

namespace detail {

inline std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace detail

// Decodes a RIFF/WAVE PCM 16-bit payload. Multi-channel audio is downmixed by
// averaging the channels. Unknown chunks (LIST, fact, ...) are skipped.
inline Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  using detail::read_u16;
  using detail::read_u32;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE payload");

  int channels = 0;
  int rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t chunk_size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + 16 > bytes.size()) throw FormatError("truncated fmt chunk");
      std::uint16_t format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = static_cast<int>(read_u32(bytes.data() + body + 4));
      const std::uint16_t bits = read_u16(bytes.data() + body + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real format code in its sub-format GUID.
      if (format == 0xFFFE) {
        if (chunk_size < 40 || body + 26 > bytes.size()) throw FormatError("truncated extensible fmt chunk");
        format = read_u16(bytes.data() + body + 24);
      }
      if (format != 1) throw FormatError("unsupported WAV encoding (only PCM is accepted)");
      if (bits != 16) throw FormatError("unsupported bit depth " + std::to_string(bits) + " (only 16-bit PCM)");
      if (channels <= 0 || rate <= 0) throw FormatError("invalid channel count or sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk");
      if (body + chunk_size > bytes.size()) throw FormatError("truncated data chunk");
      const std::size_t frame_bytes = 2 * static_cast<std::size_t>(channels);
      const std::size_t frames = chunk_size / frame_bytes;
      if (frames == 0) throw FormatError("WAV contains no samples");
      Waveform w{std::vector<float>(frames), rate};
      const std::uint8_t* p = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
          const auto s = static_cast<std::int16_t>(read_u16(p + (i * channels + c) * 2));
          acc += s / 32768.0;
        }
        w.samples[i] = static_cast<float>(acc / channels);
      }
      return w;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw FormatError(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

inline std::int16_t to_pcm16(float s) {
  const double scaled = std::round(static_cast<double>(s) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

// Encodes interleaved PCM16 with the given channel count.
inline std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, int sample_rate_hz,
                                            int channels = 1) {
  using namespace detail;
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz * channels * 2));
  put_u16(out, static_cast<std::uint16_t>(channels * 2));
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : interleaved) put_u16(out, static_cast<std::uint16_t>(to_pcm16(s)));
  return out;
}

inline std::vector<std::uint8_t> encode_wav(const Waveform& w) {
  return encode_wav(w.samples, w.sample_rate_hz, 1);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline Waveform load_wav(const std::filesystem::path& path) {
  try {
    return decode_wav(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void save_wav(const std::filesystem::path& path, const Waveform& w) {
  write_file_bytes(path, encode_wav(w));
}

}  // namespace rlda::dsp
