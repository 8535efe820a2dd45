#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlda/agent/dqn.hpp"
#include "rlda/agent/telemetry.hpp"
#include "rlda/corpus/audio.hpp"
#include "rlda/corpus/balance.hpp"
#include "rlda/corpus/domains.hpp"
#include "rlda/corpus/manifest.hpp"
#include "rlda/corpus/split.hpp"
#include "rlda/corpus/synthetic.hpp"
#include "rlda/dsp/pipeline.hpp"
#include "rlda/env/environment.hpp"
#include "rlda/experiments/evaluate.hpp"
#include "rlda/experiments/scenario.hpp"
#include "rlda/experiments/supervised.hpp"
#include "rlda/nn/checkpoint.hpp"

namespace rlda::experiments {

// One (scenario, method, seed) outcome.
struct RunRecord {
  std::string run_id;
  std::string timestamp;
  std::string scenario;
  std::string scheme;
  std::string source;
  std::string target;
  std::string method;
  std::uint64_t seed = 0;
  double uar = 0.0;        // on the scenario's evaluation set
  double base_uar = 0.0;   // frozen base model on the same set
  std::array<std::optional<double>, kNumEmotions> recall{};
  ConfusionMatrix confusion{};
  double source_test_uar = 0.0;
  double target_test_uar = 0.0;  // clean target test
  std::string eval_set;
  std::int64_t steps = 0;        // RL steps (or supervised epochs for sl_da)
  std::int64_t train_steps = 0;
  double wall_s = 0.0;
};

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json recall = nlohmann::json::object();
  for (Emotion e : kAllEmotions) {
    const auto& v = r.recall[static_cast<std::size_t>(code(e))];
    recall[std::string(name(e))] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  }
  return {{"run_id", r.run_id},
          {"timestamp", r.timestamp},
          {"scenario", r.scenario},
          {"scheme", r.scheme},
          {"source", r.source},
          {"target", r.target},
          {"method", r.method},
          {"seed", r.seed},
          {"uar", r.uar},
          {"base_uar", r.base_uar},
          {"recall", recall},
          {"confusion", r.confusion},
          {"source_test_uar", r.source_test_uar},
          {"target_test_uar", r.target_test_uar},
          {"eval_set", r.eval_set},
          {"steps", r.steps},
          {"train_steps", r.train_steps},
          {"wall_s", r.wall_s}};
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.timestamp = j.value("timestamp", std::string());
  r.scenario = j.at("scenario").get<std::string>();
  r.scheme = j.value("scheme", std::string());
  r.source = j.value("source", std::string());
  r.target = j.value("target", std::string());
  r.method = j.at("method").get<std::string>();
  r.seed = j.value("seed", std::uint64_t{0});
  r.uar = j.at("uar").get<double>();
  r.base_uar = j.value("base_uar", 0.0);
  if (j.contains("recall"))
    for (Emotion e : kAllEmotions) {
      const auto& v = j["recall"].value(std::string(name(e)), nlohmann::json(nullptr));
      if (!v.is_null()) r.recall[static_cast<std::size_t>(code(e))] = v.get<double>();
    }
  if (j.contains("confusion")) r.confusion = j["confusion"].get<ConfusionMatrix>();
  r.source_test_uar = j.value("source_test_uar", 0.0);
  r.target_test_uar = j.value("target_test_uar", 0.0);
  r.eval_set = j.value("eval_set", std::string());
  r.steps = j.value("steps", std::int64_t{0});
  r.train_steps = j.value("train_steps", std::int64_t{0});
  r.wall_s = j.value("wall_s", 0.0);
  return r;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Throws if any evaluation utterance (or an augmented copy of one) is among
// the ids used for parameter updates.
inline void check_no_test_leak(const std::vector<corpus::Utterance>& trained,
                               const std::vector<corpus::Utterance>& test) {
  std::unordered_set<std::string> test_ids;
  for (const auto& u : test) test_ids.insert(u.id);
  for (const auto& u : trained) {
    const auto base = u.id.substr(0, u.id.find('~'));
    if (test_ids.count(u.id) || test_ids.count(base))
      throw ValueError("test utterance '" + base + "' is part of a training set");
  }
}

// Loads clips once and caches their features (and audio when noise is mixed
// on top).
class FeatureStore {
 public:
  explicit FeatureStore(bool keep_audio) : keep_audio_(keep_audio) {}

  env::Sample get(const corpus::Utterance& u) {
    if (auto it = cache_.find(u.id); it != cache_.end()) return it->second;
    if (!u.label) throw ValueError("utterance '" + u.id + "' has no label");
    auto wave = dsp::conform(corpus::load_audio(u));
    env::Sample s{u.id, *u.label, agent::share(dsp::mfcc(wave)), nullptr};
    if (keep_audio_) s.audio = std::make_shared<const dsp::Waveform>(std::move(wave));
    return cache_.emplace(u.id, std::move(s)).first->second;
  }

  std::vector<env::Sample> get(const std::vector<corpus::Utterance>& us) {
    std::vector<env::Sample> out;
    out.reserve(us.size());
    for (const auto& u : us) out.push_back(get(u));
    return out;
  }

  std::size_t size() const { return cache_.size(); }

 private:
  bool keep_audio_;
  std::unordered_map<std::string, env::Sample> cache_;
};

// Each test clip gets one noise recording and one segment offset, both fixed
// by (seed, id), so every model is scored on the same noisy clips.
inline std::vector<env::Sample> noisy_copies(const std::vector<env::Sample>& clean,
                                             const std::vector<dsp::Waveform>& bank, double snr_db,
                                             std::uint64_t seed) {
  if (bank.empty()) throw ValueError("noise bank is empty");
  std::vector<env::Sample> out;
  out.reserve(clean.size());
  for (const auto& s : clean) {
    if (!s.audio) throw ValueError("noise mixing needs audio for utterance '" + s.id + "'");
    const auto h = corpus::detail::mix_seed(seed, std::hash<std::string>{}(s.id));
    const auto mix = dsp::mix_noise(*s.audio, bank[h % bank.size()], snr_db, h);
    out.push_back({s.id, s.label, agent::share(dsp::mfcc(mix.mixture)), nullptr});
  }
  return out;
}

inline corpus::Corpus resolve_corpus(const CorpusRef& ref, const std::filesystem::path& work_dir) {
  if (ref.manifest) return corpus::load_manifest(*ref.manifest);
  const auto dir = work_dir / "corpora" / ref.synthetic->corpus_id;
  return corpus::generate_synthetic_corpus(*ref.synthetic, dir);
}

inline nn::QNet pretrain(std::span<const env::Sample> data, const nn::Architecture& arch, const SupervisedConfig& cfg,
                         std::uint64_t seed, const std::filesystem::path& checkpoint, SupervisedResult* result = nullptr) {
  nn::QNet net(arch, seed);
  auto r = train_supervised(net, data, cfg, seed);
  nn::CheckpointMeta meta;
  meta.stage = "pretrained";
  meta.head = "softmax";
  meta.step = r.epochs_run;
  meta.extra = {{"best_epoch", r.best_epoch}, {"holdout_accuracy", r.best_holdout_accuracy}};
  if (!checkpoint.empty()) nn::save_checkpoint(checkpoint, net, nullptr, meta);
  if (result) *result = std::move(r);
  return net;
}

struct AdaptationResult {
  nn::QNet model;
  std::int64_t steps = 0;
  std::int64_t train_steps = 0;
  double mean_reward = 0.0;
};

// Q-learning adaptation of `base` on an environment over `stream`.
inline AdaptationResult adapt_rl(const nn::QNet& base, std::vector<env::Sample> stream, env::StreamConfig stream_cfg,
                                 const ScenarioConfig& cfg, std::uint64_t seed,
                                 const std::filesystem::path& telemetry_path = {}) {
  agent::DqnAgent ag(base, cfg.agent, cfg.effective_policy(), seed);
  env::EmotionEnv environment(std::move(stream), std::move(stream_cfg));
  std::unique_ptr<agent::TelemetryLog> log;
  if (!telemetry_path.empty()) log = std::make_unique<agent::TelemetryLog>(telemetry_path);
  double reward_sum = 0.0;
  if (cfg.rl.steps > 0) {
    auto state = environment.reset();
    for (std::int64_t i = 1; i <= cfg.rl.steps; ++i) {
      const double eps = ag.epsilon();
      const int a = ag.act(*state.features);
      auto res = environment.step(a);
      reward_sum += res.reward;
      const auto loss = ag.observe({state.features, a, res.reward, res.done ? nullptr : res.next.features, res.done});
      if (log) log->record({i, environment.episodes(), res.reward, loss, eps});
      state = res.done ? environment.reset() : res.next;
    }
  }
  if (log) log->flush();
  AdaptationResult out{ag.online(), cfg.rl.steps, ag.train_steps(),
                       cfg.rl.steps > 0 ? reward_sum / static_cast<double>(cfg.rl.steps) : 0.0};
  out.model.set_mode(nn::Mode::Eval);
  return out;
}

struct RunOptions {
  std::filesystem::path output_dir;  // empty: the scenario's own
  std::ostream* log = nullptr;
  std::string run_id;                // empty: timestamp
};

struct ScenarioResult {
  std::string run_id;
  std::filesystem::path output_dir;
  std::vector<RunRecord> records;
};

// Runs every (seed, method) of the scenario and appends one line per run to
// <output_dir>/results.jsonl.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  auto say = [&](const std::string& s) {
    if (opt.log) *opt.log << "[" << cfg.name << "] " << s << std::endl;
  };
  ScenarioResult out;
  out.output_dir = opt.output_dir.empty() ? cfg.output_dir : opt.output_dir;
  out.run_id = opt.run_id.empty() ? utc_timestamp() : opt.run_id;
  std::filesystem::create_directories(out.output_dir);

  const auto source = resolve_corpus(cfg.source, out.output_dir);
  const auto target = resolve_corpus(cfg.target, out.output_dir);
  const bool noisy = cfg.scheme == Scheme::LiveFeedNoise;
  auto bank = std::make_shared<std::vector<dsp::Waveform>>();
  if (noisy) {
    const auto noise = resolve_corpus(*cfg.noise, out.output_dir);
    for (const auto& u : noise.utterances) bank->push_back(corpus::load_audio(u));
  }
  say("source " + source.corpus_id + " (" + std::to_string(source.utterances.size()) + "), target " +
      target.corpus_id + " (" + std::to_string(target.utterances.size()) + ")");
  FeatureStore store(noisy);

  for (const auto seed : cfg.seeds) {
    const auto seed_dir = out.output_dir / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(seed_dir);
    const auto src_split = corpus::split_corpus(source, cfg.test_fraction, seed);
    const auto tgt_split = corpus::split_corpus(target, cfg.test_fraction, seed);
    const auto domain_scheme = cfg.scheme == Scheme::Mixed50 ? corpus::Scheme::Mixed50 : corpus::Scheme::Separate;
    auto domains = corpus::compose_domains(src_split, tgt_split, domain_scheme, seed);
    if (cfg.balance) {
      domains.pretrain = corpus::balance_classes(domains.pretrain, corpus::detail::mix_seed(seed, 1));
      domains.rl = corpus::balance_classes(domains.rl, corpus::detail::mix_seed(seed, 2));
    }
    check_disjoint(domains);
    check_no_test_leak(domains.pretrain, domains.test);
    check_no_test_leak(domains.rl, domains.test);

    const auto pretrain_set = store.get(domains.pretrain);
    const auto rl_set = store.get(domains.rl);
    const auto source_test = store.get(src_split.test);
    const auto target_test = store.get(tgt_split.test);
    std::vector<env::Sample> eval_set;
    std::string eval_name;
    switch (cfg.scheme) {
      case Scheme::Mixed50:
        eval_set = source_test;
        eval_set.insert(eval_set.end(), target_test.begin(), target_test.end());
        eval_name = "source_test+target_test";
        break;
      case Scheme::LiveFeedNoise:
        eval_set = noisy_copies(target_test, *bank, cfg.rl.snr_db, corpus::detail::mix_seed(seed, 3));
        eval_name = "target_test+noise";
        break;
      default:
        eval_set = target_test;
        eval_name = "target_test";
    }

    auto t0 = clock::now();
    SupervisedResult pre;
    const nn::QNet base = pretrain(pretrain_set, cfg.architecture, cfg.pretrain, seed, seed_dir / "base.ckpt", &pre);
    const double base_uar = evaluate_uar(base, eval_set).uar;
    {
      std::ostringstream os;
      os << "seed " << seed << ": pretrained " << pre.epochs_run << " epochs (holdout " << pre.best_holdout_accuracy
         << "%), base UAR " << std::fixed << std::setprecision(2) << base_uar << " on " << eval_name;
      say(os.str());
    }
    const double pretrain_s = std::chrono::duration<double>(clock::now() - t0).count();

    for (const auto method : cfg.methods) {
      t0 = clock::now();
      RunRecord rec;
      rec.run_id = out.run_id;
      rec.scenario = cfg.name;
      rec.scheme = std::string(to_string(cfg.scheme));
      rec.source = source.corpus_id;
      rec.target = target.corpus_id;
      rec.method = std::string(to_string(method));
      rec.seed = seed;
      rec.base_uar = base_uar;
      rec.eval_set = eval_name;
      nn::QNet model = base;
      nn::CheckpointMeta meta;
      meta.extra = {{"scenario", cfg.name}, {"seed", seed}};
      if (method == Method::RlDa) {
        env::StreamConfig sc;
        sc.seed = corpus::detail::mix_seed(seed, 4);
        sc.episode_length = cfg.rl.episode_length;
        sc.ordering = (cfg.scheme == Scheme::LiveFeed || noisy) ? env::Ordering::EndlessRandom
                                                                : env::Ordering::ShuffledEpoch;
        if (noisy) sc.noise = env::NoiseConfig{bank, cfg.rl.snr_db};
        auto res = adapt_rl(base, rl_set, sc, cfg, seed,
                            cfg.rl.telemetry ? seed_dir / "rl_da_telemetry.jsonl" : std::filesystem::path{});
        model = std::move(res.model);
        rec.steps = res.steps;
        rec.train_steps = res.train_steps;
        meta.stage = "rl";
        meta.step = res.train_steps;
      } else if (cfg.scheme == Scheme::Separate || cfg.scheme == Scheme::Mixed50) {
        auto res = train_supervised(model, rl_set, cfg.fine_tune, corpus::detail::mix_seed(seed, 5));
        rec.steps = res.epochs_run;
        meta.stage = "fine_tuned";
        meta.head = "softmax";
        meta.step = res.epochs_run;
      } else {
        meta.stage = "pretrained";  // live feed: the static model
        meta.head = "softmax";
      }
      model.set_mode(nn::Mode::Eval);
      nn::save_checkpoint(seed_dir / (rec.method + ".ckpt"), model, nullptr, meta);
      const auto ev = evaluate_uar(model, eval_set);
      rec.uar = ev.uar;
      rec.recall = ev.recall;
      rec.confusion = ev.confusion;
      rec.source_test_uar = evaluate_uar(model, source_test).uar;
      rec.target_test_uar = evaluate_uar(model, target_test).uar;
      rec.wall_s = std::chrono::duration<double>(clock::now() - t0).count() + pretrain_s;
      rec.timestamp = utc_timestamp();
      {
        std::ostringstream os;
        os << "seed " << seed << ": " << rec.method << " UAR " << std::fixed << std::setprecision(2) << rec.uar
           << " (base " << base_uar << ", " << rec.wall_s << " s)";
        say(os.str());
      }
      std::ofstream results(out.output_dir / "results.jsonl", std::ios::app);
      if (!results) throw IoError("cannot append to " + (out.output_dir / "results.jsonl").string());
      results << to_json(rec).dump() << '\n';
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace rlda::experiments
