// corpus split --manifest M --test-fraction 0.2 --seed N [--out DIR] [--by-speaker]
// corpus synth --spec S --out DIR
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rlda/corpus/manifest.hpp"
#include "rlda/corpus/split.hpp"
#include "rlda/corpus/synthetic.hpp"

namespace fs = std::filesystem;
using namespace rlda;

int main(int argc, char** argv) {
  CLI::App app{"Corpus utilities: stratified splits and synthetic corpora"};
  app.require_subcommand(1);

  auto* split = app.add_subcommand("split", "Stratified train/test split of a JSONL manifest");
  fs::path manifest, split_out;
  double fraction = 0.2;
  std::uint64_t seed = 0;
  split->add_option("--manifest", manifest, "Input manifest (JSONL)")->required()->check(CLI::ExistingFile);
  split->add_option("--test-fraction", fraction, "Per-class test share")->check(CLI::Range(0.0, 1.0));
  split->add_option("--seed", seed, "Shuffle seed")->required();
  split->add_option("--out", split_out, "Output directory (default: next to the manifest)");
  bool by_speaker = false;
  split->add_flag("--by-speaker", by_speaker, "Keep speakers disjoint instead of stratifying by label");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus from a spec file");
  fs::path spec_path, synth_out;
  synth->add_option("--spec", spec_path, "Synthetic spec (JSON, comments allowed)")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (split->parsed()) {
      const auto c = corpus::load_manifest(manifest);
      const auto s = by_speaker ? corpus::split_by_speaker(c.utterances, fraction, seed)
                                  : corpus::split_corpus(c, fraction, seed);
      const auto dir = split_out.empty() ? fs::absolute(manifest).parent_path() : split_out;
      const auto stem = manifest.stem().string();
      corpus::save_manifest(dir / (stem + ".train.jsonl"), s.train);
      corpus::save_manifest(dir / (stem + ".test.jsonl"), s.test);
      std::cout << "train " << s.train.size() << " -> " << (dir / (stem + ".train.jsonl")).string() << "\n"
                << "test " << s.test.size() << " -> " << (dir / (stem + ".test.jsonl")).string() << "\n";
    } else {
      std::ifstream in(spec_path);
      const auto spec = corpus::parse_synthetic_spec(nlohmann::json::parse(in, nullptr, true, true));
      const auto c = corpus::generate_synthetic_corpus(spec, synth_out);
      std::cout << c.utterances.size() << " clips -> " << (synth_out / "manifest.jsonl").string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
