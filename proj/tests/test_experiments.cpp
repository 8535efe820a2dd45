#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "rlda/experiments/evaluate.hpp"
#include "rlda/experiments/report.hpp"
#include "rlda/experiments/runner.hpp"
#include "rlda/experiments/scenario.hpp"
#include "rlda/experiments/supervised.hpp"
#include "rlda/nn/checkpoint.hpp"

using namespace rlda;
using namespace rlda::experiments;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("rlda_test_exp_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

UarResult uar_of(const std::vector<int>& truth, const std::vector<int>& pred) { return uar_from_predictions(truth, pred); }

nlohmann::json tiny_scenario_json(const std::string& scheme) {
  return nlohmann::json::parse(R"({
    "name": "tiny",
    "source": {"synthetic": {"corpus_id": "tsrc", "per_class": 6, "seed": 1}},
    "target": {"synthetic": {"corpus_id": "ttgt", "per_class": 6, "seed": 2, "shift": {"pitch_semitones": 2}}},
    "noise": {"synthetic": {"corpus_id": "tnoise", "kind": "noise", "per_class": 2, "seed": 3}},
    "scheme": ")" + scheme + R"(",
    "seeds": [1, 2],
    "architecture": {"conv1_filters": 2, "conv2_filters": 2, "lstm_units": 4, "dense_units": 16},
    "pretrain": {"epochs": 2, "batch_size": 8},
    "rl": {"steps": 40, "episode_length": 16},
    "agent": {"batch_size": 8, "replay_capacity": 64, "target_sync": 5, "steps_per_update": 4}
  })");
}

}  // namespace

TEST(Uar, HandExamples) {
  EXPECT_DOUBLE_EQ(uar_of({0, 1, 2, 3}, {0, 1, 2, 3}).uar, 100.0);
  // Recalls 1.0, 0.5, 0.25, 0.25.
  const std::vector<int> truth{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3};
  const std::vector<int> pred{0, 0, 0, 0, 1, 1, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0};
  const auto r = uar_of(truth, pred);
  EXPECT_DOUBLE_EQ(r.uar, 50.0);
  EXPECT_DOUBLE_EQ(*r.recall[1], 0.5);
  const std::vector<int> constant(truth.size(), 2);
  EXPECT_DOUBLE_EQ(uar_of(truth, constant).uar, 25.0);
}

TEST(Uar, AbsentClassesAreExcludedAndEmptyIsAnError) {
  const auto r = uar_of({0, 0, 1, 1}, {0, 0, 1, 0});
  EXPECT_DOUBLE_EQ(r.uar, 75.0);
  EXPECT_FALSE(r.recall[2]);
  EXPECT_FALSE(r.recall[3]);
  EXPECT_THROW(uar_of({}, {}), ValueError);
  EXPECT_THROW(uar_of({0}, {4}), ValueError);
  EXPECT_THROW(uar_of({0, 1}, {0}), ValueError);
}

TEST(UarProperty, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = std::uniform_int_distribution<int>(1, 30)(rng);
    std::uniform_int_distribution<int> cls(0, 3);
    std::vector<int> truth(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      truth[static_cast<std::size_t>(i)] = cls(rng);
      pred[static_cast<std::size_t>(i)] = cls(rng);
    }
    // Brute force: recall per present class by direct counting.
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < 4; ++c) {
      int total = 0, hit = 0;
      for (int i = 0; i < n; ++i)
        if (truth[static_cast<std::size_t>(i)] == c) {
          ++total;
          hit += pred[static_cast<std::size_t>(i)] == c;
        }
      if (total == 0) continue;
      sum += static_cast<double>(hit) / total;
      ++present;
    }
    const auto r = uar_of(truth, pred);
    EXPECT_EQ(r.uar, 100.0 * sum / present);
    for (int c = 0; c < 4; ++c) {
      std::uint64_t row = 0;
      for (int p = 0; p < 4; ++p) row += r.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(p)];
      EXPECT_EQ(row, static_cast<std::uint64_t>(std::count(truth.begin(), truth.end(), c)));
    }
    EXPECT_EQ(r.count, static_cast<std::size_t>(n));
  }
}

TEST(Report, SummaryFormatting) {
  const auto s = summarize({62.0, 64.0, 66.0});
  EXPECT_DOUBLE_EQ(s.mean, 64.0);
  ASSERT_TRUE(s.std);
  EXPECT_DOUBLE_EQ(*s.std, 2.0);
  EXPECT_EQ(format_summary(s), "64.00 ± 2.00");
  EXPECT_EQ(format_summary(summarize({63.987})), "63.99");
  EXPECT_FALSE(summarize({1.0}).std);
  EXPECT_EQ(format_summary(summarize({})), "-");
}

TEST(Report, TwoMethodsOneScenarioGiveOneRowWithDelta) {
  std::vector<RunRecord> rs;
  for (std::uint64_t seed : {1, 2})
    for (const char* m : {"rl_da", "sl_da"}) {
      RunRecord r;
      r.run_id = "run";
      r.scenario = "s";
      r.method = m;
      r.seed = seed;
      r.base_uar = 40.0;
      r.uar = std::string(m) == "rl_da" ? 60.0 + static_cast<double>(seed) : 50.0;
      rs.push_back(r);
    }
  const auto rows = compare(rs);
  ASSERT_EQ(rows.size(), 1u);
  ASSERT_TRUE(rows[0].delta);
  EXPECT_DOUBLE_EQ(*rows[0].delta, 11.5);
  EXPECT_EQ(rows[0].base.n, 2u);
  const auto table = render_table(rows);
  EXPECT_NE(table.find("| 11.50 |"), std::string::npos) << table;
  EXPECT_NE(table.find("61.50 ± 0.71"), std::string::npos) << table;
}

TEST(Report, RecordsRoundTripThroughJson) {
  RunRecord r;
  r.run_id = "x";
  r.scenario = "s";
  r.method = "rl_da";
  r.seed = 3;
  r.uar = 51.25;
  r.recall[0] = 0.5;
  r.confusion[1][2] = 7;
  const auto back = record_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.seed, 3u);
  EXPECT_EQ(back.uar, 51.25);
  EXPECT_EQ(back.recall[0], 0.5);
  EXPECT_FALSE(back.recall[1]);
  EXPECT_EQ(back.confusion[1][2], 7u);
}

TEST(Scenario, ParsesCommentedConfigWithDefaults) {
  const auto dir = temp_dir("cfg");
  std::ofstream(dir / "s.json") << R"(// comment
  {
    "source": {"manifest": "src/manifest.jsonl"},  /* inline comment */
    "target": {"synthetic": {"corpus_id": "t", "per_class": 3}},
    "scheme": "live_feed",
    "rl": {"steps": 1000}
  })";
  const auto c = load_scenario(dir / "s.json");
  EXPECT_EQ(c.scheme, Scheme::LiveFeed);
  EXPECT_EQ(*c.source.manifest, dir / "src/manifest.jsonl");
  EXPECT_EQ(c.target.synthetic->per_class, 3u);
  EXPECT_EQ(c.seeds.size(), 3u);
  EXPECT_EQ(c.pretrain.epochs, 20);
  EXPECT_EQ(c.agent.batch_size, 128u);
  EXPECT_EQ(c.effective_policy().epsilon.decay_steps, 200);
  EXPECT_EQ(c.output_dir, dir / "runs");
}

TEST(Scenario, InvalidConfigsAreRejected) {
  auto j = tiny_scenario_json("live_feed_noise");
  j.erase("noise");
  EXPECT_THROW(parse_scenario(j), ValueError);
  j = tiny_scenario_json("sideways");
  EXPECT_THROW(parse_scenario(j), ValueError);
  j = tiny_scenario_json("separate");
  j["seeds"] = nlohmann::json::array();
  EXPECT_THROW(parse_scenario(j), ValueError);
  j = tiny_scenario_json("separate");
  j["methods"] = {"rl_da", "magic"};
  EXPECT_THROW(parse_scenario(j), ValueError);
  j = tiny_scenario_json("separate");
  j["seeds"] = "many";
  EXPECT_THROW(parse_scenario(j), FormatError);
}

TEST(Runner, LeakCheckCatchesAugmentedCopiesOfTestClips) {
  corpus::Utterance a, b;
  a.id = "clip1";
  b.id = "clip1~vtlp0";
  EXPECT_NO_THROW(check_no_test_leak({a}, {b}));
  EXPECT_THROW(check_no_test_leak({b}, {a}), ValueError);
  EXPECT_THROW(check_no_test_leak({a}, {a}), ValueError);
}

TEST(Pretrain, ZeroEpochsKeepsTheInitialization) {
  const auto dir = temp_dir("pre0");
  nn::Architecture arch;
  arch.conv1_filters = 2;
  arch.conv2_filters = 2;
  std::vector<env::Sample> data;
  for (int i = 0; i < 8; ++i) {
    dsp::FeatureMatrix f;
    for (auto& v : f.values()) v = static_cast<float>(i);
    data.push_back({"u" + std::to_string(i), emotion_from_code(i % 4), agent::share(std::move(f)), nullptr});
  }
  SupervisedConfig cfg;
  cfg.epochs = 0;
  pretrain(data, arch, cfg, 5, dir / "a.ckpt");
  auto ck = nn::load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(ck.meta.stage, "pretrained");
  EXPECT_EQ(ck.meta.head, "softmax");
  nn::QNet init(arch, 5);
  for (const auto* p : init.parameters()) EXPECT_EQ(ck.net.find(p->name)->value, p->value) << p->name;

  cfg.epochs = 1;
  cfg.batch_size = 4;
  pretrain(data, arch, cfg, 5, dir / "b.ckpt");
  pretrain(data, arch, cfg, 6, dir / "c.ckpt");
  auto b = nn::load_checkpoint(dir / "b.ckpt"), c = nn::load_checkpoint(dir / "c.ckpt");
  EXPECT_NE(b.net.find("dense2.kernel")->value, c.net.find("dense2.kernel")->value);
}

TEST(Pretrain, SyntheticSourceIsSeparable) {
  // The supervised trainer acts as the separability oracle for the bundled
  // synthetic source corpus.
  const auto dir = temp_dir("separable");
  const auto cfg = load_scenario(fs::path(RLDA_CONFIG_DIR) / "separate.json");
  const auto src = corpus::generate_synthetic_corpus(*cfg.source.synthetic, dir / "src");
  const auto split = corpus::split_corpus(src, 0.2, 1);
  FeatureStore store(false);
  const auto train = store.get(split.train), test = store.get(split.test);
  SupervisedResult res;
  const auto net = pretrain(train, cfg.architecture, cfg.pretrain, 1, {}, &res);
  EXPECT_GE(res.best_holdout_accuracy, 90.0);
  EXPECT_GE(evaluate_uar(net, test).uar, 90.0);
}

TEST(Runner, NoisyTestCopiesAreDeterministic) {
  corpus::SyntheticSpec nspec;
  nspec.kind = corpus::SyntheticKind::Noise;
  std::vector<dsp::Waveform> bank{corpus::synthesize_noise(nspec, 0), corpus::synthesize_noise(nspec, 1)};
  corpus::SyntheticSpec vspec;
  std::vector<env::Sample> clean;
  for (int i = 0; i < 3; ++i) {
    auto w = corpus::synthesize_voice(vspec, emotion_from_code(i), static_cast<std::size_t>(i), {});
    clean.push_back({"c" + std::to_string(i), emotion_from_code(i), agent::share(dsp::mfcc(w)),
                     std::make_shared<const dsp::Waveform>(w)});
  }
  const auto a = noisy_copies(clean, bank, -5.0, 9), b = noisy_copies(clean, bank, -5.0, 9);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].features->values().begin(), a[i].features->values().end(), b[i].features->values().begin()));
    EXPECT_FALSE(std::equal(a[i].features->values().begin(), a[i].features->values().end(),
                            clean[i].features->values().begin()));
    EXPECT_EQ(a[i].label, clean[i].label);
  }
}

TEST(Runner, LiveFeedBaselineIsTheFrozenBaseAndRunsReproduce) {
  const auto dir = temp_dir("live");
  const auto cfg = parse_scenario(tiny_scenario_json("live_feed"), dir);
  RunOptions opt;
  opt.run_id = "first";
  const auto a = run_scenario(cfg, opt);
  opt.run_id = "second";
  const auto b = run_scenario(cfg, opt);
  ASSERT_EQ(a.records.size(), 4u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& r = a.records[i];
    if (r.method == "sl_da") EXPECT_EQ(r.uar, r.base_uar);
    if (r.method == "rl_da") {
      EXPECT_EQ(r.steps, 40);
      EXPECT_GT(r.train_steps, 0);
    }
    EXPECT_EQ(r.eval_set, "target_test");
    EXPECT_EQ(r.uar, b.records[i].uar);
    EXPECT_EQ(r.confusion, b.records[i].confusion);
  }
  // Results are appended, never overwritten.
  const auto all = read_results(a.output_dir / "results.jsonl");
  EXPECT_EQ(all.size(), 8u);
  EXPECT_EQ(compare(all).size(), 2u);
  const auto table = emit_report(dir);
  EXPECT_TRUE(fs::exists(dir / "report.md"));
  EXPECT_NE(table.find("first"), std::string::npos);
  EXPECT_TRUE(fs::exists(a.output_dir / "seed_1" / "base.ckpt"));
  EXPECT_TRUE(fs::exists(a.output_dir / "seed_1" / "rl_da_telemetry.jsonl"));
  const auto ck = nn::load_checkpoint(a.output_dir / "seed_2" / "rl_da.ckpt");
  EXPECT_EQ(ck.meta.stage, "rl");
}

TEST(Runner, ZeroStepBudgetEqualsTheBaseModel) {
  const auto dir = temp_dir("zero");
  auto j = tiny_scenario_json("separate");
  j["rl"]["steps"] = 0;
  j["seeds"] = {4};
  j["methods"] = {"rl_da"};
  const auto res = run_scenario(parse_scenario(j, dir));
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(res.records[0].uar, res.records[0].base_uar);
  EXPECT_EQ(res.records[0].train_steps, 0);
}

TEST(Runner, MixedAndNoisySchemesEvaluateOnTheirOwnSets) {
  const auto dir = temp_dir("schemes");
  auto j = tiny_scenario_json("mixed50");
  j["seeds"] = {1};
  const auto mixed = run_scenario(parse_scenario(j, dir));
  for (const auto& r : mixed.records) EXPECT_EQ(r.eval_set, "source_test+target_test");
  const auto sl = std::find_if(mixed.records.begin(), mixed.records.end(), [](auto& r) { return r.method == "sl_da"; });
  ASSERT_NE(sl, mixed.records.end());
  EXPECT_GT(sl->steps, 0);  // supervised fine-tuning ran

  j = tiny_scenario_json("live_feed_noise");
  j["seeds"] = {1};
  j["output_dir"] = "noisy";
  const auto noisy = run_scenario(parse_scenario(j, dir));
  for (const auto& r : noisy.records) {
    EXPECT_EQ(r.eval_set, "target_test+noise");
    if (r.method == "sl_da") EXPECT_EQ(r.uar, r.base_uar);
  }
}
