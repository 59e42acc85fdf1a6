#pragma once

// Experiment runner: builds the data once per seed, trains every configured
// strategy on the identical split with the identical classifier seed, and
// writes per-round metrics and selection counts plus an aggregated summary.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "selectnet/config.hpp"
#include "selectnet/data.hpp"
#include "selectnet/metrics.hpp"
#include "selectnet/selectnet.hpp"
#include "selectnet/strategies.hpp"

namespace selectnet {

struct DatasetSource {
  enum class Kind { Blobs, Moons, File };
  Kind kind = Kind::Blobs;
  int classes = 10;
  int per_class = 1000;
  int dim = 16;
  double separation = 3.0;
  double noise = 0.2;  // two-moons only
  std::filesystem::path path;
  std::uint64_t seed = 7;

  LabeledDataset load() const;
};

struct ExperimentConfig {
  DatasetSource dataset;
  double test_fraction = 0.1;
  std::vector<int> minor_classes{0, 2, 6, 7};
  double minor_keep = 0.01;
  double major_keep = 0.90;
  ClassifierConfig classifier;
  std::vector<StrategyKind> strategies{StrategyKind::Imbalanced, StrategyKind::Oversample, StrategyKind::SelfPaced,
                                       StrategyKind::Context, StrategyKind::SelectNet};
  StrategyConfig schedule;                          // shared lambda / round_epochs / rounds
  std::map<StrategyKind, StrategyConfig> overrides;  // per-strategy replacements
  SelectNetConfig selectnet;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::filesystem::path out_dir = "results";
  bool write_decisions = true;

  /// Builds a config from key-value settings; rejects unknown keys.
  static ExperimentConfig from_key_values(const KeyValues& kv);

  StrategyConfig strategy_config(StrategyKind kind) const;
  SelectNetConfig selectnet_config() const;
  void validate() const;
};

struct RunRecord {
  StrategyKind strategy = StrategyKind::Imbalanced;
  std::uint64_t seed = 0;
  std::vector<int> epochs;
  std::vector<PerClassMetrics> rounds;
  std::vector<SelectionCounts> selections;
  std::size_t label_violations = 0;

  const PerClassMetrics& final_metrics() const { return rounds.back(); }
};

/// Splits a balanced test set off the source: floor(fraction * smallest
/// class) samples from every class. Returns (remaining source, test set).
std::pair<LabeledDataset, LabeledDataset> held_out_test_split(const LabeledDataset& source, double fraction,
                                                              std::uint64_t seed);

/// Trains one strategy on a carved split and evaluates every round on `test`.
RunRecord run_strategy(StrategyKind kind, const CarvedSplit& split, const LabeledDataset& test,
                       const ExperimentConfig& config, std::uint64_t seed,
                       std::vector<std::vector<SelectionDecision>>* decision_log = nullptr);

struct ExperimentResult {
  std::vector<RunRecord> records;
  int num_classes = 0;
};

/// Runs every (strategy, seed) pair and writes the output files into
/// config.out_dir. Configuration problems surface before any training.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct SummaryRow {
  StrategyKind strategy = StrategyKind::Imbalanced;
  std::size_t runs = 0;
  double overall_acc = 0;
  double minor_recall = 0;  // mean over minor classes
  std::vector<ClassMetrics> per_class;
};

struct Summary {
  int num_classes = 0;
  std::vector<int> minor_classes;
  std::vector<SummaryRow> rows;
};

double median(std::vector<double> values);

/// Median over seeds of the final-round metrics, one row per strategy in
/// first-appearance order.
Summary summarize(std::span<const RunRecord> records, int num_classes, std::span<const int> minor_classes);

std::string summary_json(const Summary& summary);

/// Rebuilds the summary from a results directory and rewrites summary.json.
Summary summarize_directory(const std::filesystem::path& dir);

// File writers and readers for the per-run outputs.
std::string metrics_csv(const RunRecord& record);
std::string selections_csv(const RunRecord& record);
std::string run_file_name(const char* prefix, StrategyKind kind, std::uint64_t seed);

/// Final-round metrics parsed from a metrics_<strategy>_<seed>.csv file.
PerClassMetrics read_final_metrics(const std::filesystem::path& path, int num_classes);

}  // namespace selectnet
