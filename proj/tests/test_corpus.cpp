#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "rlda/corpus/audio.hpp"
#include "rlda/corpus/balance.hpp"
#include "rlda/corpus/domains.hpp"
#include "rlda/corpus/manifest.hpp"
#include "rlda/corpus/split.hpp"
#include "rlda/corpus/synthetic.hpp"
#include "rlda/dsp/wav.hpp"
#include "test_support.hpp"

using namespace rlda;
using namespace rlda::corpus;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("rlda_test_corpus_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// In-memory utterances; audio paths are never opened.
std::vector<Utterance> fake_utterances(const std::array<std::size_t, kNumEmotions>& counts, const std::string& corpus = "c") {
  std::vector<Utterance> out;
  for (Emotion e : kAllEmotions)
    for (std::size_t i = 0; i < counts[static_cast<std::size_t>(code(e))]; ++i) {
      Utterance u;
      u.id = corpus + "_" + std::string(name(e)) + "_" + std::to_string(i);
      u.audio_path = "/nonexistent/" + u.id + ".wav";
      u.label = e;
      u.corpus_id = corpus;
      out.push_back(u);
    }
  return out;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
}

std::set<std::string> ids_of(const std::vector<Utterance>& us) {
  std::set<std::string> s;
  for (const auto& u : us) s.insert(u.id);
  return s;
}

}  // namespace

TEST(Emotion, CodesRoundTripWithNames) {
  ASSERT_EQ(kAllEmotions.size(), 4u);
  const char* names[] = {"happiness", "sadness", "anger", "neutral"};
  for (int c = 0; c < kNumEmotions; ++c) {
    const Emotion e = emotion_from_code(c);
    EXPECT_EQ(code(e), c);
    EXPECT_EQ(name(e), names[c]);
    EXPECT_EQ(parse_emotion(names[c]), e);
  }
  EXPECT_FALSE(parse_emotion("fear"));
}

TEST(Manifest, LoadsOneRecordPerEmotion) {
  const auto dir = temp_dir("load");
  std::vector<std::string> lines;
  for (Emotion e : kAllEmotions) {
    const std::string id = "u_" + std::string(name(e));
    dsp::save_wav(dir / (id + ".wav"), fixtures::sine(200.0 + 100 * code(e), 0.5, 16000));
    lines.push_back(R"({"id":")" + id + R"(","path":")" + id + R"(.wav","label":")" + std::string(name(e)) +
                    R"(","corpus_id":"demo","speaker_id":"s1"})");
  }
  write_lines(dir / "manifest.jsonl", lines);
  const auto c = load_manifest(dir / "manifest.jsonl");
  ASSERT_EQ(c.utterances.size(), 4u);
  EXPECT_EQ(c.corpus_id, "demo");
  EXPECT_EQ(c.sample_rate_hz, 16000);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(c.utterances[i].label, kAllEmotions[i]);
    EXPECT_EQ(c.utterances[i].speaker_id, "s1");
    EXPECT_TRUE(fs::exists(c.utterances[i].audio_path));
  }
}

TEST(Manifest, RoundTripKeepsIdsLabelsAndOrder) {
  const auto dir = temp_dir("roundtrip");
  fs::create_directories(dir / "audio");
  std::vector<Utterance> us;
  for (int i = 0; i < 9; ++i) {
    Utterance u;
    u.id = "clip" + std::to_string(8 - i);
    u.audio_path = dir / "audio" / (u.id + ".wav");
    dsp::save_wav(u.audio_path, fixtures::sine(300, 0.1));
    if (i != 4) u.label = emotion_from_code(i % 4);
    u.corpus_id = "rt";
    if (i % 2) u.speaker_id = "spk" + std::to_string(i);
    if (i == 7) {
      u.augmented = true;
      u.warp_alpha = 0.93;
    }
    us.push_back(u);
  }
  save_manifest(dir / "m.jsonl", us);
  const auto back = load_manifest(dir / "m.jsonl");
  ASSERT_EQ(back.utterances.size(), us.size());
  for (std::size_t i = 0; i < us.size(); ++i) {
    EXPECT_EQ(back.utterances[i].id, us[i].id);
    EXPECT_EQ(back.utterances[i].label, us[i].label);
    EXPECT_EQ(back.utterances[i].speaker_id, us[i].speaker_id);
    EXPECT_EQ(back.utterances[i].augmented, us[i].augmented);
    EXPECT_EQ(back.utterances[i].warp_alpha, us[i].warp_alpha);
    EXPECT_EQ(fs::weakly_canonical(back.utterances[i].audio_path), fs::weakly_canonical(us[i].audio_path));
  }
}

TEST(Manifest, RejectsEmptyFile) {
  const auto dir = temp_dir("empty");
  write_lines(dir / "m.jsonl", {});
  try {
    load_manifest(dir / "m.jsonl");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("empty corpus"), std::string::npos);
  }
}

TEST(Manifest, UnknownLabelIsNamedWithLineNumber) {
  const auto dir = temp_dir("fear");
  dsp::save_wav(dir / "a.wav", fixtures::sine(300, 0.1));
  write_lines(dir / "m.jsonl", {R"({"id":"a","path":"a.wav","label":"anger"})", R"({"id":"b","path":"a.wav","label":"fear"})"});
  try {
    load_manifest(dir / "m.jsonl");
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'fear'"), std::string::npos) << msg;
    EXPECT_NE(msg.find(":2:"), std::string::npos) << msg;
  }
}

TEST(Manifest, MalformedAndDuplicateRecordsReportLine) {
  const auto dir = temp_dir("malformed");
  dsp::save_wav(dir / "a.wav", fixtures::sine(300, 0.1));
  write_lines(dir / "bad.jsonl", {R"({"id":"a","path":"a.wav","label":"anger"})", "", R"({"id":"b", "path":)"});
  try {
    load_manifest(dir / "bad.jsonl");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  write_lines(dir / "dup.jsonl", {R"({"id":"a","path":"a.wav","label":"anger"})", R"({"id":"a","path":"a.wav","label":"neutral"})"});
  try {
    load_manifest(dir / "dup.jsonl");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate id 'a'"), std::string::npos) << e.what();
  }
  write_lines(dir / "noid.jsonl", {R"({"path":"a.wav"})"});
  EXPECT_THROW(load_manifest(dir / "noid.jsonl"), FormatError);
}

TEST(Manifest, MissingFilesAreIoErrors) {
  const auto dir = temp_dir("missing");
  EXPECT_THROW(load_manifest(dir / "nope.jsonl"), IoError);
  write_lines(dir / "m.jsonl", {R"({"id":"a","path":"gone.wav","label":"anger"})"});
  EXPECT_THROW(load_manifest(dir / "m.jsonl"), IoError);
}

TEST(Split, HundredUtterancesGiveFivePerClass) {
  const auto us = fake_utterances({25, 25, 25, 25});
  const auto s = split_corpus(us, 0.2, 7);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.test.size(), 20u);
  for (auto n : label_histogram(s.test)) EXPECT_EQ(n, 5u);
}

TEST(Split, StratifiedRoundingPerClass) {
  // Oracle: per class round(count * fraction), enumerated by hand.
  const auto s = split_corpus(fake_utterances({10, 10, 10, 13}), 0.2, 3);
  const auto h = label_histogram(s.test);
  EXPECT_EQ(h[0], 2u);
  EXPECT_EQ(h[1], 2u);
  EXPECT_EQ(h[2], 2u);
  EXPECT_EQ(h[3], 3u);
}

TEST(Split, DeterministicForSeedAndVariesAcrossSeeds) {
  const auto us = fake_utterances({25, 25, 25, 25});
  const auto a = split_corpus(us, 0.2, 7), b = split_corpus(us, 0.2, 7), c = split_corpus(us, 0.2, 8);
  EXPECT_EQ(ids_of(a.test), ids_of(b.test));
  EXPECT_EQ(ids_of(a.train), ids_of(b.train));
  EXPECT_NE(ids_of(a.test), ids_of(c.test));
}

TEST(Split, RejectsTinyClassesAndBadFractions) {
  EXPECT_THROW(split_corpus(fake_utterances({5, 1, 5, 5}), 0.2, 1), ValueError);
  EXPECT_THROW(split_corpus(fake_utterances({5, 5, 5, 5}), 0.0, 1), ValueError);
  EXPECT_THROW(split_corpus(fake_utterances({5, 5, 5, 5}), 1.0, 1), ValueError);
}

TEST(SplitProperty, DisjointAndExhaustiveForRandomCorpora) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<std::size_t> count(2, 40);
  std::uniform_real_distribution<double> frac(0.05, 0.6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto us = fake_utterances({count(rng), count(rng), count(rng), count(rng)});
    const double f = frac(rng);
    const auto s = split_corpus(us, f, rng());
    const auto tr = ids_of(s.train), te = ids_of(s.test);
    std::set<std::string> inter;
    std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::inserter(inter, inter.begin()));
    EXPECT_TRUE(inter.empty());
    EXPECT_EQ(tr.size() + te.size(), us.size());
    const auto all = label_histogram(us), test = label_histogram(s.test);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(test[c], stratified_test_count(all[c], f));
  }
}

TEST(Split, BySpeakerKeepsSpeakersDisjoint) {
  auto us = fake_utterances({12, 12, 12, 12});
  for (std::size_t i = 0; i < us.size(); ++i) us[i].speaker_id = "spk" + std::to_string(i % 6);
  const auto s = split_by_speaker(us, 0.2, 3);
  EXPECT_EQ(s.train.size() + s.test.size(), us.size());
  EXPECT_GE(s.test.size(), 10u);
  std::set<std::string> train_spk, test_spk;
  for (const auto& u : s.train) train_spk.insert(*u.speaker_id);
  for (const auto& u : s.test) test_spk.insert(*u.speaker_id);
  for (const auto& spk : test_spk) EXPECT_FALSE(train_spk.count(spk)) << spk;
  EXPECT_EQ(ids_of(split_by_speaker(us, 0.2, 3).test), ids_of(s.test));
  us[0].speaker_id.reset();
  EXPECT_THROW(split_by_speaker(us, 0.2, 3), ValueError);
}

TEST(Balance, BalancedInputIsUnchanged) {
  const auto us = fake_utterances({10, 10, 10, 10});
  const auto out = balance_classes(us, 1);
  ASSERT_EQ(out.size(), us.size());
  for (std::size_t i = 0; i < us.size(); ++i) EXPECT_EQ(out[i].id, us[i].id);
}

TEST(Balance, TopsUpTheShortClassWithWarpedCopies) {
  const auto us = fake_utterances({8, 10, 10, 10});
  const auto out = balance_classes(us, 1);
  ASSERT_EQ(out.size(), 40u);
  for (std::size_t i = 38; i < 40; ++i) {
    EXPECT_EQ(out[i].label, Emotion::Happiness);
    EXPECT_TRUE(out[i].augmented);
    ASSERT_TRUE(out[i].warp_alpha);
    EXPECT_GE(*out[i].warp_alpha, 0.9);
    EXPECT_LE(*out[i].warp_alpha, 1.1);
    EXPECT_NE(out[i].id.find("~vtlp"), std::string::npos);
  }
}

TEST(Balance, EmptyClassIsAnError) {
  EXPECT_THROW(balance_classes(fake_utterances({0, 3, 3, 3}), 1), ValueError);
}

TEST(BalanceProperty, UniformHistogramNoRemovalNoDuplicateIds) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> count(1, 30);
  for (int trial = 0; trial < 200; ++trial) {
    const std::array<std::size_t, 4> counts{count(rng), count(rng), count(rng), count(rng)};
    const auto us = fake_utterances(counts);
    const auto out = balance_classes(us, rng());
    const auto h = label_histogram(out);
    const auto mx = *std::max_element(counts.begin(), counts.end());
    for (auto n : h) EXPECT_EQ(n, mx);
    EXPECT_EQ(ids_of(out).size(), out.size());
    for (std::size_t i = 0; i < us.size(); ++i) EXPECT_EQ(out[i].id, us[i].id);
  }
}

TEST(Domains, SeparateAndMixedSizes) {
  const auto src = split_corpus(fake_utterances({25, 25, 25, 25}, "src"), 0.2, 1);
  const auto tgt = split_corpus(fake_utterances({25, 25, 25, 25}, "tgt"), 0.2, 1);
  const auto sep = compose_domains(src, tgt, Scheme::Separate, 5);
  EXPECT_EQ(sep.pretrain.size(), 80u);
  EXPECT_EQ(sep.rl.size(), 80u);
  EXPECT_EQ(sep.test.size(), 40u);
  EXPECT_EQ(ids_of(sep.pretrain), ids_of(src.train));
  const auto mix = compose_domains(src, tgt, Scheme::Mixed50, 5);
  EXPECT_EQ(mix.pretrain.size(), 40u);
  EXPECT_EQ(mix.rl.size(), 120u);
  EXPECT_EQ(mix.test.size(), 40u);
}

TEST(DomainsProperty, SetsArePairwiseDisjoint) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> count(2, 30);
  for (int trial = 0; trial < 100; ++trial) {
    const auto src = split_corpus(fake_utterances({count(rng), count(rng), count(rng), count(rng)}, "s"), 0.2, rng());
    const auto tgt = split_corpus(fake_utterances({count(rng), count(rng), count(rng), count(rng)}, "t"), 0.2, rng());
    for (Scheme sc : {Scheme::Separate, Scheme::Mixed50}) {
      const auto d = compose_domains(src, tgt, sc, rng());
      std::set<std::string> all;
      for (const auto* set : {&d.pretrain, &d.rl, &d.test})
        for (const auto& u : *set) EXPECT_TRUE(all.insert(u.id).second);
      if (sc == Scheme::Mixed50) EXPECT_EQ(d.pretrain.size(), src.train.size() / 2);
    }
  }
}

TEST(Domains, DisjointCheckCatchesLeaks) {
  DomainAssignment d;
  d.pretrain = fake_utterances({1, 0, 0, 0});
  d.test = d.pretrain;
  EXPECT_THROW(check_disjoint(d), ValueError);
  d.test = fake_utterances({0, 1, 0, 0});
  d.test[0].augmented = true;
  EXPECT_THROW(check_disjoint(d), ValueError);
}

TEST(Synthetic, FullCorpusIsPlayableAndDeterministic) {
  SyntheticSpec spec;
  spec.corpus_id = "det";
  spec.seed = 5;
  const auto a = temp_dir("synth_a"), b = temp_dir("synth_b");
  const auto ca = generate_synthetic_corpus(spec, a);
  ASSERT_EQ(ca.utterances.size(), 200u);
  const auto loaded = load_manifest(a / "manifest.jsonl");
  ASSERT_EQ(loaded.utterances.size(), 200u);
  EXPECT_EQ(loaded.sample_rate_hz, 22050);
  for (auto n : label_histogram(loaded.utterances)) EXPECT_EQ(n, 50u);
  const auto first = dsp::load_wav(loaded.utterances.front().audio_path);
  EXPECT_EQ(first.size(), 44100u);
  generate_synthetic_corpus(spec, b);
  for (const auto& u : ca.utterances) {
    const auto other = b / u.audio_path.filename();
    EXPECT_EQ(dsp::read_file_bytes(u.audio_path), dsp::read_file_bytes(other)) << u.id;
  }
  spec.seed = 6;
  const auto c = temp_dir("synth_c");
  spec.per_class = 1;
  generate_synthetic_corpus(spec, c);
  EXPECT_NE(dsp::read_file_bytes(a / "det_happiness_000.wav"), dsp::read_file_bytes(c / "det_happiness_000.wav"));
}

TEST(Synthetic, ShiftChangesTheAudio) {
  SyntheticSpec spec;
  const SpeakerTraits speaker{};
  const auto plain = synthesize_voice(spec, Emotion::Neutral, 0, speaker);
  spec.shift.pitch_semitones = 2.0;
  const auto shifted = synthesize_voice(spec, Emotion::Neutral, 0, speaker);
  ASSERT_EQ(plain.size(), shifted.size());
  double diff = 0.0;
  for (std::size_t i = 0; i < plain.size(); ++i) diff = std::max(diff, double(std::abs(plain.samples[i] - shifted.samples[i])));
  EXPECT_GT(diff, 0.05);
}

TEST(Synthetic, InvalidSpecsAreRejected) {
  SyntheticSpec spec;
  spec.per_class = 0;
  EXPECT_THROW(spec.validate(), ValueError);
  EXPECT_THROW(parse_synthetic_spec(nlohmann::json{{"kind", "music"}}), ValueError);
  EXPECT_THROW(parse_synthetic_spec(nlohmann::json{{"voices", {{"fear", nlohmann::json::object()}}}}), ValueError);
}

TEST(Audio, WarpedCopiesLoadWithTheirOwnAudio) {
  const auto dir = temp_dir("audio");
  Utterance u;
  u.id = "x";
  u.audio_path = dir / "x.wav";
  u.label = Emotion::Anger;
  dsp::save_wav(u.audio_path, fixtures::sine(500, 2.0, 16000));
  const auto f = utterance_features(u);
  EXPECT_EQ(dsp::FeatureMatrix::kRows, 40u);
  EXPECT_EQ(dsp::FeatureMatrix::kCols, 87u);
  Utterance w = u;
  w.warp_alpha = 1.15;
  EXPECT_EQ(load_audio(u).sample_rate_hz, 22050);
  const auto g = utterance_features(w);
  double diff = 0.0;
  for (std::size_t i = 0; i < dsp::FeatureMatrix::kSize; ++i) diff = std::max(diff, double(std::abs(g.values()[i] - f.values()[i])));
  EXPECT_GT(diff, 1e-3);
}
