#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlda/error.hpp"
#include "rlda/experiments/runner.hpp"

namespace rlda::experiments {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> std;  // sample standard deviation; needs two repeats
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

inline std::string format_fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// "63.99 ± 1.95", or just the mean for a single repeat.
inline std::string format_summary(const Summary& s) {
  if (s.n == 0) return "-";
  return s.std ? format_fixed(s.mean) + " ± " + format_fixed(*s.std) : format_fixed(s.mean);
}

// One table row: a scenario of one run, all methods side by side.
struct ComparisonRow {
  std::string run_id;
  std::string scenario;
  std::string scheme;
  std::string source;
  std::string target;
  std::string eval_set;
  Summary base;
  Summary sl_da;
  Summary rl_da;
  std::optional<double> delta;  // rl_da mean - sl_da mean
  std::int64_t steps = 0;
  double wall_s = 0.0;
};

inline std::vector<ComparisonRow> compare(const std::vector<RunRecord>& records) {
  using Key = std::tuple<std::string, std::string>;
  std::map<Key, std::vector<const RunRecord*>> groups;
  std::vector<Key> order;
  for (const auto& r : records) {
    Key k{r.run_id, r.scenario};
    if (!groups.count(k)) order.push_back(k);
    groups[k].push_back(&r);
  }
  std::vector<ComparisonRow> rows;
  for (const auto& k : order) {
    const auto& g = groups[k];
    ComparisonRow row;
    row.run_id = std::get<0>(k);
    row.scenario = std::get<1>(k);
    row.scheme = g.front()->scheme;
    row.source = g.front()->source;
    row.target = g.front()->target;
    row.eval_set = g.front()->eval_set;
    std::map<std::uint64_t, double> base_by_seed;
    std::vector<double> sl, rl;
    for (const auto* r : g) {
      base_by_seed[r->seed] = r->base_uar;
      (r->method == "rl_da" ? rl : sl).push_back(r->uar);
      if (r->method == "rl_da") row.steps = r->steps;
      row.wall_s += r->wall_s;
    }
    std::vector<double> base;
    for (const auto& [seed, v] : base_by_seed) base.push_back(v);
    row.base = summarize(base);
    row.sl_da = summarize(sl);
    row.rl_da = summarize(rl);
    if (row.sl_da.n && row.rl_da.n) row.delta = row.rl_da.mean - row.sl_da.mean;
    rows.push_back(row);
  }
  return rows;
}

inline std::string render_table(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "| Run | Scenario | Scheme | Source | Target | Evaluated on | Base | SL-DA | RL-DA | Δ |\n"
     << "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows)
    os << "| " << r.run_id << " | " << r.scenario << " | " << r.scheme << " | " << r.source << " | " << r.target
       << " | " << r.eval_set << " | " << format_summary(r.base) << " | " << format_summary(r.sl_da) << " | "
       << format_summary(r.rl_da) << " | " << (r.delta ? format_fixed(*r.delta) : std::string("-")) << " |\n";
  return os.str();
}

inline std::vector<RunRecord> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open results file " + path.string());
  std::vector<RunRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// Collects results.jsonl files under `dir` (recursively) and writes
// <dir>/report.md. Returns the rendered table.
inline std::string emit_report(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "results.jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> records;
  for (const auto& f : files) {
    auto rs = read_results(f);
    records.insert(records.end(), rs.begin(), rs.end());
  }
  if (records.empty()) throw ValueError("no results.jsonl records under " + dir.string());
  const auto table = render_table(compare(records));
  std::ofstream out(dir / "report.md");
  if (!out) throw IoError("cannot write " + (dir / "report.md").string());
  out << "# Results\n\nUAR in percent, mean ± sample std over seeds. Δ = RL-DA − SL-DA.\n\n" << table;
  return table;
}

}  // namespace rlda::experiments
