#include "selectnet/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "selectnet/random.hpp"

namespace selectnet {

namespace {

using nlohmann::json;

constexpr StrategyKind kAllStrategies[] = {StrategyKind::Imbalanced, StrategyKind::Oversample,
                                           StrategyKind::SelfPaced, StrategyKind::Context, StrategyKind::SelectNet};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

LabeledDataset DatasetSource::load() const {
  switch (kind) {
    case Kind::Blobs: return generate_gaussian_blobs(classes, per_class, dim, separation, seed);
    case Kind::Moons: return generate_two_moons(per_class, noise, seed);
    case Kind::File: return load_dataset(path, format_from_path(path));
  }
  throw ConfigError("unknown dataset kind");
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
  ExperimentConfig c;
  const auto kind = kv.get_string("dataset", "blobs");
  if (kind == "blobs") {
    c.dataset.kind = DatasetSource::Kind::Blobs;
  } else if (kind == "moons") {
    c.dataset.kind = DatasetSource::Kind::Moons;
    c.dataset.classes = 2;
  } else if (kind == "file") {
    c.dataset.kind = DatasetSource::Kind::File;
  } else {
    throw ConfigError("dataset must be blobs, moons or file, got '" + kind + "'");
  }
  c.dataset.path = kv.get_string("dataset.path", "");
  c.dataset.classes = kv.get_int("blobs.classes", c.dataset.classes);
  c.dataset.per_class = kv.get_int("blobs.per_class", c.dataset.per_class);
  c.dataset.dim = kv.get_int("blobs.dim", c.dataset.dim);
  c.dataset.separation = kv.get_double("blobs.separation", c.dataset.separation);
  c.dataset.per_class = kv.get_int("moons.per_class", c.dataset.per_class);
  c.dataset.noise = kv.get_double("moons.noise", c.dataset.noise);
  c.dataset.seed = static_cast<std::uint64_t>(kv.get_int("data_seed", static_cast<int>(c.dataset.seed)));

  c.test_fraction = kv.get_double("test_fraction", c.test_fraction);
  c.minor_classes = kv.get_int_list("minor_classes", c.minor_classes);
  c.minor_keep = kv.get_double("minor_keep", c.minor_keep);
  c.major_keep = kv.get_double("major_keep", c.major_keep);

  c.classifier.hidden = kv.get_int_list("hidden", c.classifier.hidden);
  c.classifier.sgd.learning_rate = kv.get_double("lr", c.classifier.sgd.learning_rate);
  c.classifier.sgd.momentum = kv.get_double("momentum", c.classifier.sgd.momentum);
  c.classifier.sgd.batch_size = kv.get_int("batch_size", c.classifier.sgd.batch_size);

  if (kv.contains("strategies")) {
    c.strategies.clear();
    for (const auto& name : kv.get_string_list("strategies", {})) {
      const auto k = parse_strategy(name);
      if (!k) throw ConfigError("unknown strategy '" + name + "'");
      c.strategies.push_back(*k);
    }
  }

  c.schedule.lambda = kv.get_double("lambda", c.schedule.lambda);
  c.schedule.round_epochs = kv.get_int("round_epochs", c.schedule.round_epochs);
  c.schedule.rounds = kv.get_int("rounds", c.schedule.rounds);
  for (auto k : kAllStrategies) {
    const auto prefix = to_string(k) + ".";
    if (!kv.contains(prefix + "lambda") && !kv.contains(prefix + "round_epochs") && !kv.contains(prefix + "rounds"))
      continue;
    StrategyConfig s = c.schedule;
    s.lambda = kv.get_double(prefix + "lambda", s.lambda);
    s.round_epochs = kv.get_int(prefix + "round_epochs", s.round_epochs);
    s.rounds = kv.get_int(prefix + "rounds", s.rounds);
    c.overrides[k] = s;
  }

  auto& sn = c.selectnet;
  sn.beta = kv.get_double("selectnet.beta", sn.beta);
  sn.selector_steps = kv.get_int("selectnet.selector_steps", sn.selector_steps);
  sn.selector_lr = kv.get_double("selectnet.selector_lr", sn.selector_lr);
  sn.selector_momentum = kv.get_double("selectnet.selector_momentum", sn.selector_momentum);
  sn.selector_batch = kv.get_int("selectnet.selector_batch", sn.selector_batch);
  sn.reinit_selector = kv.get_bool("selectnet.reinit_selector", sn.reinit_selector);
  sn.init_epochs = kv.get_int("selectnet.init_epochs", sn.init_epochs);

  c.seeds = kv.get_seed_list("seeds", c.seeds);
  c.out_dir = kv.get_string("out", c.out_dir.string());
  c.write_decisions = kv.get_bool("write_decisions", c.write_decisions);

  const auto unknown = kv.unused();
  if (!unknown.empty()) throw ConfigError("unknown config key '" + unknown.front() + "'");
  return c;
}

StrategyConfig ExperimentConfig::strategy_config(StrategyKind kind) const {
  const auto it = overrides.find(kind);
  return it == overrides.end() ? schedule : it->second;
}

SelectNetConfig ExperimentConfig::selectnet_config() const {
  SelectNetConfig sn = selectnet;
  const auto s = strategy_config(StrategyKind::SelectNet);
  sn.lambda = s.lambda;
  sn.round_epochs = s.round_epochs;
  sn.rounds = s.rounds;
  return sn;
}

void ExperimentConfig::validate() const {
  if (strategies.empty()) throw ConfigError("at least one strategy is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (!(test_fraction > 0 && test_fraction <= 0.5)) throw ConfigError("test_fraction must lie in (0, 0.5]");
  if (dataset.kind == DatasetSource::Kind::File && dataset.path.empty())
    throw ConfigError("dataset = file needs dataset.path");
  if (dataset.kind == DatasetSource::Kind::Blobs) {
    if (dataset.classes < 2) throw ConfigError("blobs.classes must be at least 2");
    if (dataset.per_class < 1 || dataset.dim < 1) throw ConfigError("blobs.per_class and blobs.dim must be positive");
    if (!(dataset.separation > 0)) throw ConfigError("blobs.separation must be positive");
  }
  classifier.validate();
  for (auto k : strategies) strategy_config(k).validate();
  selectnet_config().validate();
  if (dataset.kind != DatasetSource::Kind::File)
    ImbalanceSpec{minor_classes, minor_keep, major_keep, 0}.validate(dataset.classes);
}

std::pair<LabeledDataset, LabeledDataset> held_out_test_split(const LabeledDataset& source, double fraction,
                                                              std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 0.5)) throw InputError("test fraction must lie in (0, 0.5]");
  const auto counts = source.class_counts();
  const auto smallest = *std::min_element(counts.begin(), counts.end());
  const auto per_class = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(smallest) + 1e-9));
  if (per_class == 0) throw InputError("too few samples for a balanced test split");

  std::vector<std::vector<std::size_t>> by_class(counts.size());
  for (std::size_t i = 0; i < source.size(); ++i)
    by_class[static_cast<std::size_t>(source.labels()[i])].push_back(i);
  auto rng = make_rng(seed, {stream::kTestSplit});
  std::vector<bool> is_test(source.size(), false);
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < per_class; ++k) is_test[idx[k]] = true;
  }
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < source.size(); ++i) (is_test[i] ? test : train).push_back(i);
  return {source.subset(train), source.subset(test)};
}

RunRecord run_strategy(StrategyKind kind, const CarvedSplit& split, const LabeledDataset& test,
                       const ExperimentConfig& config, std::uint64_t seed,
                       std::vector<std::vector<SelectionDecision>>* decision_log) {
  const auto& labeled = split.labeled;
  const auto& pool = split.pool;
  const auto schedule = config.strategy_config(kind);
  const auto& minors = config.minor_classes;

  RunRecord record;
  record.strategy = kind;
  record.seed = seed;
  auto observer = [&](const RoundReport& report, const Mlp& classifier) {
    record.epochs.push_back(report.epoch);
    record.rounds.push_back(evaluate(classifier, test));
    record.selections.push_back(selection_counts(report.decisions, labeled, pool));
    record.label_violations += count_label_violations(report.decisions, labeled);
    if (decision_log) decision_log->push_back(report.decisions);
  };

  switch (kind) {
    case StrategyKind::Imbalanced:
      train_with_plan(strategy_imbalanced(labeled, schedule), pool, schedule, config.classifier, seed, observer);
      break;
    case StrategyKind::Oversample:
      train_with_plan(strategy_oversampling(labeled, schedule, seed), pool, schedule, config.classifier, seed,
                      observer);
      break;
    case StrategyKind::SelfPaced:
      train_with_plan(strategy_self_paced(labeled, pool, minors, schedule), pool, schedule, config.classifier, seed,
                      observer);
      break;
    case StrategyKind::Context:
      train_with_plan(strategy_context(labeled, pool, minors, schedule), pool, schedule, config.classifier, seed,
                      observer);
      break;
    case StrategyKind::SelectNet:
      run_selectnet(labeled, pool, minors, config.classifier, config.selectnet_config(), seed, observer);
      break;
  }
  return record;
}

std::string run_file_name(const char* prefix, StrategyKind kind, std::uint64_t seed) {
  return std::string(prefix) + "_" + to_string(kind) + "_" + std::to_string(seed) + ".csv";
}

std::string metrics_csv(const RunRecord& record) {
  std::ostringstream out;
  const auto m = record.rounds.empty() ? 0 : record.rounds.front().classes.size();
  out << "round,epoch,overall_acc";
  for (std::size_t c = 0; c < m; ++c) out << ",precision_" << c << ",recall_" << c << ",f1_" << c;
  out << '\n';
  for (std::size_t r = 0; r < record.rounds.size(); ++r) {
    const auto& pm = record.rounds[r];
    out << r << ',' << record.epochs[r] << ',' << fmt(pm.accuracy);
    for (const auto& k : pm.classes) out << ',' << fmt(k.precision) << ',' << fmt(k.recall) << ',' << fmt(k.f1);
    out << '\n';
  }
  return out.str();
}

std::string selections_csv(const RunRecord& record) {
  std::ostringstream out;
  out << "round,labeled_confused,labeled_minor,unlabeled_confused,unlabeled_minor,total_added\n";
  for (std::size_t r = 0; r < record.selections.size(); ++r) {
    const auto& s = record.selections[r];
    out << r << ',' << s.labeled_confused << ',' << s.labeled_minor << ',' << s.unlabeled_confused << ','
        << s.unlabeled_minor << ',' << s.total() << '\n';
  }
  return out.str();
}

namespace {

std::string decisions_csv(const std::vector<std::vector<SelectionDecision>>& log, const CarvedSplit& split) {
  std::ostringstream out;
  out << "round,source,index,assigned_label,predicted_label,true_label\n";
  for (std::size_t r = 0; r < log.size(); ++r)
    for (const auto& d : log[r])
      out << r << ',' << (d.source == Source::Labeled ? "labeled" : "unlabeled") << ',' << d.index << ','
          << d.assigned_label << ',' << d.predicted_label << ',' << true_label(d, split.labeled, split.pool) << '\n';
  return out.str();
}

json experiment_json(const ExperimentConfig& config, int num_classes) {
  json j;
  j["num_classes"] = num_classes;
  j["minor_classes"] = config.minor_classes;
  j["minor_keep"] = config.minor_keep;
  j["major_keep"] = config.major_keep;
  j["seeds"] = config.seeds;
  std::vector<std::string> names;
  for (auto k : config.strategies) names.push_back(to_string(k));
  j["strategies"] = names;
  return j;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const LabeledDataset source = config.dataset.load();
  ImbalanceSpec{config.minor_classes, config.minor_keep, config.major_keep, 0}.validate(source.num_classes());

  std::filesystem::create_directories(config.out_dir);
  write_file(config.out_dir / "experiment.json", experiment_json(config, source.num_classes()).dump(2) + "\n");

  ExperimentResult result;
  result.num_classes = source.num_classes();
  for (const auto seed : config.seeds) {
    const auto [train_source, test] = held_out_test_split(source, config.test_fraction, seed);
    const auto split =
        carve_imbalance(train_source, ImbalanceSpec{config.minor_classes, config.minor_keep, config.major_keep, seed});
    for (const auto kind : config.strategies) {
      std::vector<std::vector<SelectionDecision>> log;
      auto record = run_strategy(kind, split, test, config, seed, config.write_decisions ? &log : nullptr);
      write_file(config.out_dir / run_file_name("metrics", kind, seed), metrics_csv(record));
      write_file(config.out_dir / run_file_name("selections", kind, seed), selections_csv(record));
      if (config.write_decisions)
        write_file(config.out_dir / run_file_name("decisions", kind, seed), decisions_csv(log, split));
      result.records.push_back(std::move(record));
    }
  }
  summarize_directory(config.out_dir);
  return result;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Summary summarize(std::span<const RunRecord> records, int num_classes, std::span<const int> minor_classes) {
  Summary summary;
  summary.num_classes = num_classes;
  summary.minor_classes.assign(minor_classes.begin(), minor_classes.end());

  std::vector<StrategyKind> order;
  for (const auto& r : records)
    if (std::find(order.begin(), order.end(), r.strategy) == order.end()) order.push_back(r.strategy);

  for (auto kind : order) {
    std::vector<const PerClassMetrics*> finals;
    for (const auto& r : records)
      if (r.strategy == kind && !r.rounds.empty()) finals.push_back(&r.final_metrics());
    SummaryRow row;
    row.strategy = kind;
    row.runs = finals.size();
    std::vector<double> acc, minor;
    for (const auto* f : finals) {
      acc.push_back(f->accuracy);
      minor.push_back(f->mean_recall(minor_classes));
    }
    row.overall_acc = median(acc);
    row.minor_recall = median(minor);
    row.per_class.resize(static_cast<std::size_t>(num_classes));
    for (std::size_t c = 0; c < row.per_class.size(); ++c) {
      std::vector<double> p, r, f;
      for (const auto* fm : finals) {
        p.push_back(fm->classes.at(c).precision);
        r.push_back(fm->classes.at(c).recall);
        f.push_back(fm->classes.at(c).f1);
      }
      row.per_class[c] = {median(p), median(r), median(f), finals.empty() ? 0 : finals.front()->classes.at(c).support};
    }
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

std::string summary_json(const Summary& summary) {
  json j;
  j["num_classes"] = summary.num_classes;
  j["minor_classes"] = summary.minor_classes;
  j["aggregate"] = "median over seeds of final-round metrics";

  // Best strategy per column; ties go to the first row.
  std::map<std::string, std::pair<double, std::string>> best;
  auto consider = [&](const std::string& column, double value, const std::string& name) {
    auto it = best.find(column);
    if (it == best.end() || value > it->second.first) best[column] = {value, name};
  };
  for (const auto& row : summary.rows) {
    const auto name = to_string(row.strategy);
    consider("overall_acc", row.overall_acc, name);
    consider("minor_recall", row.minor_recall, name);
    for (std::size_t c = 0; c < row.per_class.size(); ++c) {
      consider("recall_" + std::to_string(c), row.per_class[c].recall, name);
      consider("f1_" + std::to_string(c), row.per_class[c].f1, name);
    }
  }

  json rows = json::array();
  for (const auto& row : summary.rows) {
    const auto name = to_string(row.strategy);
    json r;
    r["strategy"] = name;
    r["runs"] = row.runs;
    r["overall_acc"] = row.overall_acc;
    r["minor_recall"] = row.minor_recall;
    json per_class = json::array();
    for (std::size_t c = 0; c < row.per_class.size(); ++c) {
      const auto& k = row.per_class[c];
      const bool minor = std::find(summary.minor_classes.begin(), summary.minor_classes.end(), static_cast<int>(c)) !=
                         summary.minor_classes.end();
      per_class.push_back({{"class", c},
                           {"minor", minor},
                           {"precision", k.precision},
                           {"recall", k.recall},
                           {"f1", k.f1}});
    }
    r["per_class"] = per_class;
    std::vector<std::string> best_columns;
    for (const auto& [column, v] : best)
      if (v.second == name) best_columns.push_back(column);
    r["best_in"] = best_columns;
    rows.push_back(r);
  }
  j["rows"] = rows;
  json best_json;
  for (const auto& [column, v] : best) best_json[column] = v.second;
  j["best"] = best_json;
  return j.dump(2) + "\n";
}

PerClassMetrics read_final_metrics(const std::filesystem::path& path, int num_classes) {
  std::istringstream in(read_file(path));
  std::string line, last;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no > 1 && !line.empty()) last = line;
  }
  if (last.empty()) throw ParseError(path.string() + ": no metric rows", line_no);
  std::vector<double> fields;
  std::istringstream row(last);
  std::string cell;
  while (std::getline(row, cell, ',')) {
    try {
      fields.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad value '" + cell + "' on line " + std::to_string(line_no), line_no);
    }
  }
  const auto expected = 3 + 3 * static_cast<std::size_t>(num_classes);
  if (fields.size() != expected)
    throw ParseError(path.string() + ": expected " + std::to_string(expected) + " columns on line " +
                         std::to_string(line_no),
                     line_no);
  PerClassMetrics pm;
  pm.accuracy = fields[2];
  for (int c = 0; c < num_classes; ++c) {
    const auto base = 3 + 3 * static_cast<std::size_t>(c);
    pm.classes.push_back({fields[base], fields[base + 1], fields[base + 2], 0});
  }
  return pm;
}

Summary summarize_directory(const std::filesystem::path& dir) {
  const auto meta = json::parse(read_file(dir / "experiment.json"));
  const int m = meta.at("num_classes").get<int>();
  const auto minors = meta.at("minor_classes").get<std::vector<int>>();
  std::vector<RunRecord> records;
  for (const auto& name : meta.at("strategies").get<std::vector<std::string>>()) {
    const auto kind = parse_strategy(name);
    if (!kind) throw InputError("unknown strategy '" + name + "' in experiment.json");
    for (const auto seed : meta.at("seeds").get<std::vector<std::uint64_t>>()) {
      const auto path = dir / run_file_name("metrics", *kind, seed);
      if (!std::filesystem::exists(path)) continue;
      RunRecord r;
      r.strategy = *kind;
      r.seed = seed;
      r.rounds.push_back(read_final_metrics(path, m));
      records.push_back(std::move(r));
    }
  }
  if (records.empty()) throw InputError("no metrics files found in " + dir.string());
  auto summary = summarize(records, m, minors);
  write_file(dir / "summary.json", summary_json(summary));
  return summary;
}

}  // namespace selectnet
