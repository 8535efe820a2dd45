// exp run --config FILE [--out DIR]
// exp report --dir DIR
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "rlda/experiments/report.hpp"
#include "rlda/experiments/runner.hpp"
#include "rlda/experiments/scenario.hpp"

namespace fs = std::filesystem;
using namespace rlda;

int main(int argc, char** argv) {
  CLI::App app{"Domain adaptation experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario and append its results");
  fs::path config, out;
  bool quiet = false;
  run->add_option("--config", config, "Scenario config (JSON, comments allowed)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (overrides the config)");
  run->add_flag("--quiet", quiet, "No progress output");

  auto* report = app.add_subcommand("report", "Render report.md from results.jsonl files under a directory");
  fs::path dir;
  report->add_option("--dir", dir, "Results directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) {
      const auto cfg = experiments::load_scenario(config);
      experiments::RunOptions opt;
      opt.output_dir = out;
      opt.log = quiet ? nullptr : &std::cerr;
      const auto res = experiments::run_scenario(cfg, opt);
      std::cout << experiments::render_table(experiments::compare(res.records));
      std::cout << "results appended to " << (res.output_dir / "results.jsonl").string() << "\n";
    } else {
      std::cout << experiments::emit_report(dir);
      std::cout << "written " << (dir / "report.md").string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
