#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlda/corpus/manifest.hpp"
#include "rlda/dsp/fft.hpp"
#include "rlda/dsp/wav.hpp"

namespace rlda::corpus {

// Desk-scale stand-in for an emotional speech corpus. Each class is a
// harmonic "voice" with its own pitch, pitch glide, syllable rate, spectral
// tilt and formant peaks; clips vary by speaker and per clip. A domain shift
// moves pitch, tempo and formants and can lay a band-limited background
// texture under every clip.
struct ClassVoice {
  double f0_hz = 180.0;
  double contour_semitones = 0.0;  // glide across each syllable, + rising
  double syllable_rate_hz = 4.0;
  double tilt = 1.2;               // harmonic roll-off exponent
  std::vector<double> formants_hz{600.0, 1500.0, 2600.0};
};

struct Variation {
  double clip_f0_semitones = 0.8;  // std dev per clip
  double speaker_f0_semitones = 1.2;
  double rate_fraction = 0.1;
  double formant_fraction = 0.04;
  double tilt = 0.15;
};

struct Texture {
  double low_hz = 300.0;
  double high_hz = 3400.0;
  double snr_db = 10.0;  // voice relative to texture
};

struct DomainShift {
  double pitch_semitones = 0.0;
  double tempo = 1.0;          // multiplies syllable rates
  double formant_scale = 1.0;
  double tilt_offset = 0.0;
  std::optional<Texture> texture;
};

enum class SyntheticKind { Speech, Noise };

struct SyntheticSpec {
  std::string corpus_id = "synthetic";
  SyntheticKind kind = SyntheticKind::Speech;
  std::size_t per_class = 50;  // clips per emotion (total clips for noise)
  double duration_s = 2.0;
  int sample_rate_hz = dsp::kFeatureRate;
  std::size_t speakers = 8;
  std::uint64_t seed = 1;
  std::array<ClassVoice, kNumEmotions> voices = default_voices();
  Variation variation;
  DomainShift shift;

  static std::array<ClassVoice, kNumEmotions> default_voices() {
    std::array<ClassVoice, kNumEmotions> v;
    v[code(Emotion::Happiness)] = {230.0, 4.0, 5.0, 1.0, {700.0, 1800.0, 2800.0}};
    v[code(Emotion::Sadness)] = {150.0, -3.0, 2.5, 2.0, {500.0, 1200.0, 2500.0}};
    v[code(Emotion::Anger)] = {210.0, -1.0, 6.5, 0.6, {750.0, 1600.0, 3000.0}};
    v[code(Emotion::Neutral)] = {170.0, 0.0, 3.8, 1.4, {550.0, 1500.0, 2600.0}};
    return v;
  }

  void validate() const {
    if (per_class == 0) throw ValueError("synthetic spec: per_class must be positive");
    if (!(duration_s > 0) || duration_s > 60) throw ValueError("synthetic spec: duration must lie in (0, 60] s");
    if (sample_rate_hz < 8000) throw ValueError("synthetic spec: sample rate must be at least 8000 Hz");
    if (speakers == 0) throw ValueError("synthetic spec: need at least one speaker");
    if (!(shift.tempo > 0) || !(shift.formant_scale > 0)) throw ValueError("synthetic spec: tempo and formant scale must be positive");
    for (const auto& v : voices) {
      if (!(v.f0_hz > 40) || v.f0_hz > 1000) throw ValueError("synthetic spec: f0 must lie in (40, 1000] Hz");
      if (!(v.syllable_rate_hz > 0)) throw ValueError("synthetic spec: syllable rate must be positive");
      if (v.formants_hz.empty()) throw ValueError("synthetic spec: each voice needs a formant");
    }
    if (shift.texture && !(shift.texture->low_hz >= 0 && shift.texture->high_hz > shift.texture->low_hz))
      throw ValueError("synthetic spec: texture band is empty");
  }
};

inline void from_json(const nlohmann::json& j, ClassVoice& v) {
  v.f0_hz = j.value("f0_hz", v.f0_hz);
  v.contour_semitones = j.value("contour_semitones", v.contour_semitones);
  v.syllable_rate_hz = j.value("syllable_rate_hz", v.syllable_rate_hz);
  v.tilt = j.value("tilt", v.tilt);
  v.formants_hz = j.value("formants_hz", v.formants_hz);
}

inline SyntheticSpec parse_synthetic_spec(const nlohmann::json& j) {
  SyntheticSpec s;
  s.corpus_id = j.value("corpus_id", s.corpus_id);
  const auto kind = j.value("kind", std::string("speech"));
  if (kind == "noise") s.kind = SyntheticKind::Noise;
  else if (kind != "speech") throw ValueError("synthetic spec: kind must be 'speech' or 'noise'");
  s.per_class = j.value("per_class", s.per_class);
  s.duration_s = j.value("duration_s", s.duration_s);
  s.sample_rate_hz = j.value("sample_rate_hz", s.sample_rate_hz);
  s.speakers = j.value("speakers", s.speakers);
  s.seed = j.value("seed", s.seed);
  if (j.contains("voices")) {
    for (auto it = j["voices"].begin(); it != j["voices"].end(); ++it) {
      const auto e = parse_emotion(it.key());
      if (!e) throw ValueError("synthetic spec: unknown emotion '" + it.key() + "'");
      ClassVoice v = s.voices[static_cast<std::size_t>(code(*e))];
      from_json(it.value(), v);
      s.voices[static_cast<std::size_t>(code(*e))] = v;
    }
  }
  if (j.contains("variation")) {
    const auto& v = j["variation"];
    s.variation.clip_f0_semitones = v.value("clip_f0_semitones", s.variation.clip_f0_semitones);
    s.variation.speaker_f0_semitones = v.value("speaker_f0_semitones", s.variation.speaker_f0_semitones);
    s.variation.rate_fraction = v.value("rate_fraction", s.variation.rate_fraction);
    s.variation.formant_fraction = v.value("formant_fraction", s.variation.formant_fraction);
    s.variation.tilt = v.value("tilt", s.variation.tilt);
  }
  if (j.contains("shift")) {
    const auto& d = j["shift"];
    s.shift.pitch_semitones = d.value("pitch_semitones", 0.0);
    s.shift.tempo = d.value("tempo", 1.0);
    s.shift.formant_scale = d.value("formant_scale", 1.0);
    s.shift.tilt_offset = d.value("tilt_offset", 0.0);
    if (d.contains("texture") && !d["texture"].is_null()) {
      Texture t;
      t.low_hz = d["texture"].value("low_hz", t.low_hz);
      t.high_hz = d["texture"].value("high_hz", t.high_hz);
      t.snr_db = d["texture"].value("snr_db", t.snr_db);
      s.shift.texture = t;
    }
  }
  s.validate();
  return s;
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ull + b + 0x632be59bd9b4e019ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// White noise restricted to [low, high] Hz, unit RMS.
inline std::vector<double> band_noise(std::size_t n, int rate, double low, double high, std::mt19937_64& rng) {
  const std::size_t m = dsp::next_pow2(n);
  std::normal_distribution<double> g;
  std::vector<double> x(m);
  for (auto& v : x) v = g(rng);
  const dsp::Fft fft(m);
  auto spec = fft.rfft(x);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * rate / static_cast<double>(m);
    if (f < low || f > high) spec[k] = 0.0;
  }
  auto y = fft.irfft(spec);
  y.resize(n);
  double e = 0;
  for (double v : y) e += v * v;
  const double scale = e > 0 ? 1.0 / std::sqrt(e / static_cast<double>(n)) : 0.0;
  for (auto& v : y) v *= scale;
  return y;
}

inline double rms_of(const std::vector<double>& x) {
  double e = 0;
  for (double v : x) e += v * v;
  return x.empty() ? 0.0 : std::sqrt(e / static_cast<double>(x.size()));
}

inline void normalize_peak(std::vector<double>& x, double peak) {
  double top = 0;
  for (double v : x) top = std::max(top, std::abs(v));
  if (top > 0)
    for (auto& v : x) v *= peak / top;
}

}  // namespace detail

struct SpeakerTraits {
  double f0_semitones = 0.0;
  double formant_scale = 1.0;
};

// One clip of class `e`. Deterministic in (spec, emotion, index).
inline dsp::Waveform synthesize_voice(const SyntheticSpec& spec, Emotion e, std::size_t index,
                                      const SpeakerTraits& speaker) {
  const auto& voice = spec.voices[static_cast<std::size_t>(code(e))];
  const auto& var = spec.variation;
  std::mt19937_64 rng(detail::mix_seed(spec.seed, (static_cast<std::uint64_t>(code(e)) << 32) | index));
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);

  const int fs = spec.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * fs));
  const double semis = spec.shift.pitch_semitones + speaker.f0_semitones + var.clip_f0_semitones * g(rng);
  const double f0 = voice.f0_hz * std::pow(2.0, semis / 12.0);
  const double rate = voice.syllable_rate_hz * spec.shift.tempo * (1.0 + var.rate_fraction * g(rng));
  const double tilt = std::max(0.2, voice.tilt + spec.shift.tilt_offset + var.tilt * g(rng));
  std::vector<double> formants;
  for (double f : voice.formants_hz)
    formants.push_back(f * spec.shift.formant_scale * speaker.formant_scale * (1.0 + var.formant_fraction * g(rng)));

  const double start = (0.02 + 0.10 * u(rng)) * spec.duration_s;
  const double stop = (0.88 + 0.10 * u(rng)) * spec.duration_s;
  const double syl_phase0 = u(rng);
  const double max_harmonic_hz = std::min(6000.0, 0.45 * fs);

  std::vector<double> x(n, 0.0);
  double phase = 0.0;  // fundamental phase, radians
  constexpr std::size_t kBlock = 64;
  std::vector<double> amp;
  for (std::size_t b = 0; b < n; b += kBlock) {
    const double tb = static_cast<double>(b) / fs;
    const double syl = rate * (tb - start) + syl_phase0;
    const double glide = voice.contour_semitones * ((syl - std::floor(syl)) - 0.5);
    const double fb = f0 * std::pow(2.0, (glide + 0.15 * std::sin(2 * std::numbers::pi * 5.5 * tb)) / 12.0);
    const auto harmonics = static_cast<std::size_t>(std::max(1.0, std::floor(max_harmonic_hz / fb)));
    amp.assign(harmonics, 0.0);
    for (std::size_t k = 1; k <= harmonics; ++k) {
      const double fk = static_cast<double>(k) * fb;
      double shape = 0.1;
      for (double fm : formants) {
        const double bw = 60.0 + 0.08 * fm;
        shape += std::exp(-0.5 * (fk - fm) * (fk - fm) / (bw * bw));
      }
      amp[k - 1] = std::pow(static_cast<double>(k), -tilt) * shape;
    }
    const std::size_t end = std::min(n, b + kBlock);
    for (std::size_t i = b; i < end; ++i) {
      const double t = static_cast<double>(i) / fs;
      phase += 2 * std::numbers::pi * fb / fs;
      if (t < start || t > stop) continue;
      const double s = rate * (t - start) + syl_phase0;
      const double env = std::pow(std::max(0.0, std::sin(std::numbers::pi * (s - std::floor(s)))), 1.5);
      const double edge = std::min({1.0, (t - start) / 0.03, (stop - t) / 0.03});
      double v = 0.0;
      for (std::size_t k = 0; k < harmonics; ++k) v += amp[k] * std::sin(static_cast<double>(k + 1) * phase);
      x[i] = v * env * edge;
    }
  }
  const double voice_rms = detail::rms_of(x);
  std::normal_distribution<double> breath(0.0, 0.01 * (voice_rms > 0 ? voice_rms : 1.0));
  for (auto& v : x) v += breath(rng);
  if (spec.shift.texture && voice_rms > 0) {
    const auto& tx = *spec.shift.texture;
    const auto bed = detail::band_noise(n, fs, tx.low_hz, tx.high_hz, rng);
    const double gain = voice_rms * std::pow(10.0, -tx.snr_db / 20.0);
    for (std::size_t i = 0; i < n; ++i) x[i] += gain * bed[i];
  }
  detail::normalize_peak(x, 0.35 + 0.5 * u(rng));
  dsp::Waveform w;
  w.sample_rate_hz = fs;
  w.samples.assign(x.begin(), x.end());
  return w;
}

// Background recording stand-in: pink-ish noise, a mains-like hum, and
// sparse clatter transients.
inline dsp::Waveform synthesize_noise(const SyntheticSpec& spec, std::size_t index) {
  std::mt19937_64 rng(detail::mix_seed(spec.seed, 0xfeed0000ull + index));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int fs = spec.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * fs));
  std::vector<double> x(n, 0.0);
  const std::array<std::pair<double, double>, 4> bands{{{50, 400}, {400, 1500}, {1500, 4000}, {4000, 9000}}};
  const std::array<double, 4> weights{1.0, 0.25, 0.08, 0.03};
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const auto y = detail::band_noise(n, fs, bands[b].first, std::min(bands[b].second, 0.49 * fs), rng);
    for (std::size_t i = 0; i < n; ++i) x[i] += weights[b] * y[i];
  }
  const double hum_hz = 50.0 + 10.0 * u(rng);
  for (std::size_t i = 0; i < n; ++i) x[i] += 0.3 * std::sin(2 * std::numbers::pi * hum_hz * static_cast<double>(i) / fs);
  std::normal_distribution<double> g;
  const auto clatter = static_cast<std::size_t>(spec.duration_s * 3);
  for (std::size_t c = 0; c < clatter; ++c) {
    const auto at = static_cast<std::size_t>(u(rng) * static_cast<double>(n));
    const double f = 1500 + 3000 * u(rng), decay = 0.01 + 0.03 * u(rng), a = 0.3 + 0.3 * u(rng);
    for (std::size_t i = at; i < std::min(n, at + static_cast<std::size_t>(0.2 * fs)); ++i) {
      const double t = static_cast<double>(i - at) / fs;
      x[i] += a * std::exp(-t / decay) * (std::sin(2 * std::numbers::pi * f * t) + 0.3 * g(rng));
    }
  }
  detail::normalize_peak(x, 0.6);
  dsp::Waveform w;
  w.sample_rate_hz = fs;
  w.samples.assign(x.begin(), x.end());
  return w;
}

inline std::vector<SpeakerTraits> speaker_traits(const SyntheticSpec& spec) {
  std::mt19937_64 rng(detail::mix_seed(spec.seed, 0x5eedull));
  std::normal_distribution<double> g;
  std::vector<SpeakerTraits> out(spec.speakers);
  for (auto& s : out) {
    s.f0_semitones = spec.variation.speaker_f0_semitones * g(rng);
    s.formant_scale = 1.0 + spec.variation.formant_fraction * g(rng);
  }
  return out;
}

// Writes <out_dir>/<corpus_id>_<class>_<nnn>.wav (or _noise_<nnn>.wav) and
// <out_dir>/manifest.jsonl; returns the corpus.
inline Corpus generate_synthetic_corpus(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);
  Corpus c;
  c.corpus_id = spec.corpus_id;
  c.sample_rate_hz = spec.sample_rate_hz;
  char num[16];
  if (spec.kind == SyntheticKind::Noise) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      std::snprintf(num, sizeof num, "%03zu", i);
      Utterance u;
      u.id = spec.corpus_id + "_noise_" + num;
      u.audio_path = out_dir / (u.id + ".wav");
      u.corpus_id = spec.corpus_id;
      dsp::save_wav(u.audio_path, synthesize_noise(spec, i));
      c.utterances.push_back(std::move(u));
    }
  } else {
    const auto speakers = speaker_traits(spec);
    for (Emotion e : kAllEmotions) {
      for (std::size_t i = 0; i < spec.per_class; ++i) {
        std::snprintf(num, sizeof num, "%03zu", i);
        Utterance u;
        u.id = spec.corpus_id + "_" + std::string(name(e)) + "_" + num;
        u.audio_path = out_dir / (u.id + ".wav");
        u.label = e;
        u.corpus_id = spec.corpus_id;
        const std::size_t spk = (i + static_cast<std::size_t>(code(e))) % speakers.size();
        u.speaker_id = spec.corpus_id + "_spk" + std::to_string(spk);
        dsp::save_wav(u.audio_path, synthesize_voice(spec, e, i, speakers[spk]));
        c.utterances.push_back(std::move(u));
      }
    }
  }
  save_manifest(out_dir / "manifest.jsonl", c);
  return c;
}

}  // namespace rlda::corpus
