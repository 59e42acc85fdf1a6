// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criteria 6 to 9 share one default experiment written under
// ./acceptance_results.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "selectnet/harness.hpp"
#include "selectnet/selfcheck.hpp"

using namespace selectnet;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool passed, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", passed ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!passed) ++failures;
}

void report_check(int id, const CheckResult& r, double limit_seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.2fs, limit %.0fs)", r.seconds, limit_seconds);
  report(id, r.name, r.passed && r.seconds < limit_seconds, r.detail + buf);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

}  // namespace

int main() {
  report_check(1, check_gradients(), 10);
  report_check(2, check_selection_rule(), 10);
  report_check(3, check_oversampling(), 5);
  report_check(4, check_selector_sign(), 30);
  report_check(5, check_carving(), 10);

  const fs::path out = fs::current_path() / "acceptance_results";
  fs::remove_all(out);
  ExperimentConfig config = ExperimentConfig::from_key_values(KeyValues{});
  config.out_dir = out / "run";

  const auto t0 = std::chrono::steady_clock::now();
  const auto result = run_experiment(config);
  const double runtime = seconds_since(t0);

  // Criterion 6: medians over seeds of the final-round metrics.
  const auto summary = summarize_directory(config.out_dir);
  auto row = [&](StrategyKind k) -> const SummaryRow& {
    return *std::find_if(summary.rows.begin(), summary.rows.end(), [&](const auto& r) { return r.strategy == k; });
  };
  const double sn = row(StrategyKind::SelectNet).overall_acc;
  const double ctx = row(StrategyKind::Context).overall_acc;
  const double imb = row(StrategyKind::Imbalanced).overall_acc;
  const double sp = row(StrategyKind::SelfPaced).overall_acc;
  const double recall_gap = row(StrategyKind::SelectNet).minor_recall - row(StrategyKind::Imbalanced).minor_recall;
  report(6, "strategy ordering", sn >= ctx && ctx >= imb && sn >= sp && recall_gap >= 0.15 && runtime < 600,
         fmt("median acc selectnet %.4f context %.4f self_paced %.4f imbalanced %.4f", sn, ctx, sp, imb) +
             fmt(", minor recall gap %.4f (>= 0.15), runtime %.1fs (< 600s)", recall_gap, runtime));

  // Criterion 7: last ten rounds of every SelectNet run.
  bool bounded_all = true;
  std::string detail7;
  for (const auto seed : config.seeds) {
    const auto rows = csv_rows(config.out_dir / run_file_name("selections", StrategyKind::SelectNet, seed));
    std::vector<double> totals;
    int minor_largest = 0;
    for (std::size_t r = rows.size() - 10; r < rows.size(); ++r) {
      const double lc = std::stod(rows[r][1]), lm = std::stod(rows[r][2]);
      const double uc = std::stod(rows[r][3]), um = std::stod(rows[r][4]);
      totals.push_back(std::stod(rows[r][5]));
      if (um > lc && um > lm && um > uc) ++minor_largest;
    }
    const double mx = *std::max_element(totals.begin(), totals.end());
    const double md = median_of(totals);
    const bool ok = mx <= 2 * md && minor_largest >= 7;
    bounded_all &= ok;
    detail7 += fmt("seed %.0f max/median %.3f unlabeled_minor largest %.0f/10; ", static_cast<double>(seed),
                   md > 0 ? mx / md : 0.0, minor_largest);
  }
  report(7, "bounded mostly-correct selections", bounded_all, detail7);

  // Criterion 8: rerun a subset of the runs and compare metrics files byte for byte.
  ExperimentConfig again = config;
  again.seeds = {config.seeds.front(), config.seeds.back()};
  again.out_dir = out / "rerun";
  run_experiment(again);
  std::size_t compared = 0, identical = 0;
  for (const auto seed : again.seeds)
    for (const auto k : again.strategies) {
      const auto name = run_file_name("metrics", k, seed);
      ++compared;
      if (slurp(config.out_dir / name) == slurp(again.out_dir / name) && !slurp(again.out_dir / name).empty())
        ++identical;
    }
  report(8, "determinism", compared > 0 && identical == compared,
         fmt("%.0f of %.0f metrics files byte-identical on rerun", static_cast<double>(identical),
             static_cast<double>(compared)));

  // Criterion 9: audit every decision log against the label rule, and check the
  // logs agree with the per-round selection counts.
  std::size_t decisions = 0, violations = 0, count_mismatch = 0;
  for (const auto& rec : result.records) {
    const auto rows = csv_rows(config.out_dir / run_file_name("decisions", rec.strategy, rec.seed));
    std::vector<std::size_t> per_round(rec.rounds.size(), 0);
    for (const auto& r : rows) {
      ++decisions;
      ++per_round[std::stoul(r[0])];
      const bool labeled = r[1] == "labeled";
      const int assigned = std::stoi(r[3]), predicted = std::stoi(r[4]), truth = std::stoi(r[5]);
      if (labeled ? assigned != truth : assigned != predicted) ++violations;
    }
    for (std::size_t r = 0; r < per_round.size(); ++r)
      if (per_round[r] != rec.selections[r].total()) ++count_mismatch;
  }
  report(9, "label discipline", violations == 0 && count_mismatch == 0 && decisions > 0,
         fmt("%.0f decisions audited across %.0f runs, %.0f violations, %.0f log/count mismatches",
             static_cast<double>(decisions), static_cast<double>(result.records.size()),
             static_cast<double>(violations), static_cast<double>(count_mismatch)));

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
