#include "selectnet/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "selectnet/random.hpp"

namespace selectnet {

void sort_canonical(std::vector<SelectionDecision>& decisions) {
  std::sort(decisions.begin(), decisions.end(), [](const SelectionDecision& a, const SelectionDecision& b) {
    return std::tie(a.source, a.index) < std::tie(b.source, b.index);
  });
}

void StrategyConfig::validate() const {
  if (!(lambda > 0)) throw ConfigError("lambda must be positive");
  if (round_epochs < 1) throw ConfigError("round_epochs must be at least 1");
  if (rounds < 1) throw ConfigError("rounds must be at least 1");
}

void ClassifierConfig::validate() const {
  for (int w : hidden)
    if (w < 1) throw ConfigError("hidden widths must be positive");
  sgd.validate();
}

Mlp make_classifier(int input_dim, int num_classes, const ClassifierConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<LayerSpec> layers;
  for (int w : config.hidden) layers.push_back({w, Activation::ReLU});
  layers.push_back({num_classes, Activation::Softmax});
  auto rng = make_rng(seed, {stream::kClassifierInit});
  return Mlp::build(input_dim, layers, rng());
}

Prediction predict_with_confidence(const Mlp& classifier, const Matrix& features) {
  Prediction p;
  p.probs = predict(classifier, features);
  p.top1 = argmax_rows(p.probs);
  p.top1_loss.resize(p.probs.rows());
  for (Eigen::Index r = 0; r < p.probs.rows(); ++r)
    p.top1_loss(r) = -std::log(std::max(p.probs(r, p.top1[static_cast<std::size_t>(r)]), kProbabilityFloor));
  return p;
}

TrainingRows AugmentedTrainSet::materialize() const {
  const std::size_t n_base = base->size();
  const std::size_t n_add = additions.size();
  const std::size_t n = n_base + n_add;
  TrainingRows rows;
  rows.features.resize(static_cast<Eigen::Index>(n), base->dim());
  rows.labels.resize(n);
  rows.scale.resize(static_cast<Eigen::Index>(n));
  rows.features.topRows(static_cast<Eigen::Index>(n_base)) = base->features();
  std::copy(base->labels().begin(), base->labels().end(), rows.labels.begin());

  // Mean over all n rows of scale_i * L_i equals
  // (1/n_base) sum_base L + (1/n_add) sum_add L.
  const double base_scale = n_add == 0 ? 1.0 : static_cast<double>(n) / static_cast<double>(n_base);
  const double add_scale = n_add == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(n_add);
  rows.scale.head(static_cast<Eigen::Index>(n_base)).setConstant(base_scale);

  for (std::size_t k = 0; k < n_add; ++k) {
    const auto& d = additions[k];
    const auto row = static_cast<Eigen::Index>(n_base + k);
    const auto src = static_cast<Eigen::Index>(d.index);
    if (d.source == Source::Labeled) {
      if (d.index >= n_base) throw UsageError("labeled addition index out of range");
      rows.features.row(row) = base->features().row(src);
    } else {
      if (pool == nullptr || d.index >= pool->size()) throw UsageError("pool addition index out of range");
      rows.features.row(row) = pool->features().row(src);
    }
    rows.labels[n_base + k] = d.assigned_label;
    rows.scale(row) = add_scale * d.weight;
  }
  return rows;
}

ClassifierTrainer::ClassifierTrainer(Mlp model, const SgdConfig& sgd, std::uint64_t seed)
    : model_(std::move(model)), optimizer_(sgd), seed_(seed) {}

double ClassifierTrainer::train_epochs(const TrainingRows& rows, int epochs) {
  const auto n = static_cast<std::size_t>(rows.features.rows());
  const auto m = model_.output_dim();
  double last_loss = 0;
  for (int e = 0; e < epochs; ++e) {
    const auto batches = minibatches(n, static_cast<std::size_t>(optimizer_.config().batch_size), seed_,
                                     static_cast<std::uint64_t>(epochs_done_));
    double epoch_loss = 0;
    for (const auto& batch : batches) {
      const auto b = static_cast<Eigen::Index>(batch.size());
      Matrix x(b, rows.features.cols());
      Matrix y = Matrix::Zero(b, m);
      Vector w(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        const auto src = batch[static_cast<std::size_t>(i)];
        x.row(i) = rows.features.row(static_cast<Eigen::Index>(src));
        y(i, rows.labels[src]) = 1.0;
        w(i) = rows.scale(static_cast<Eigen::Index>(src)) / static_cast<double>(b);
      }
      const auto cache = forward(model_, x);
      const auto ce = cross_entropy_loss(cache.output(), y);
      epoch_loss += (ce.per_sample.array() * w.array()).sum() * static_cast<double>(b);
      optimizer_.step(model_, softmax_cross_entropy_backward(model_, cache, y, w));
    }
    last_loss = n == 0 ? 0.0 : epoch_loss / static_cast<double>(n);
    ++epochs_done_;
  }
  return last_loss;
}

TrainingResult train_with_plan(TrainingPlan plan, const UnlabeledPool& pool, const StrategyConfig& config,
                               const ClassifierConfig& classifier, std::uint64_t seed,
                               const RoundObserver& observer) {
  config.validate();
  classifier.validate();
  if (plan.base.size() == 0) throw ConfigError("base training set is empty");
  if (pool.size() > 0 && pool.features().cols() != plan.base.dim())
    throw ConfigError("pool and labeled data differ in feature dimension");

  ClassifierTrainer trainer(make_classifier(static_cast<int>(plan.base.dim()), plan.base.num_classes(), classifier, seed),
                            classifier.sgd, seed);
  if (plan.warm_start && plan.warm_start_epochs > 0) {
    AugmentedTrainSet warm{&*plan.warm_start, nullptr, {}};
    trainer.train_epochs(warm.materialize(), plan.warm_start_epochs);
  }

  TrainingResult result;
  for (int r = 0; r < config.rounds; ++r) {
    RoundSelection selection;
    if (plan.policy && trainer.epochs_done() > 0) selection = plan.policy->select(r, trainer.model());
    sort_canonical(selection.decisions);

    AugmentedTrainSet train{&plan.base, &pool, std::move(selection.decisions)};
    RoundReport report;
    report.round = r;
    report.train_size = train.size();
    report.train_loss = trainer.train_epochs(train.materialize(), config.round_epochs);
    report.epoch = (r + 1) * config.round_epochs;
    report.decisions = std::move(train.additions);
    report.candidates = selection.candidates;
    report.selector_objective_before = selection.selector_objective_before;
    report.selector_objective_after = selection.selector_objective_after;
    if (observer) observer(report, trainer.model());
    result.rounds.push_back(std::move(report));
  }
  result.classifier = trainer.model();
  return result;
}

namespace {

bool contains(std::span<const int> set, int value) {
  return std::find(set.begin(), set.end(), value) != set.end();
}

class SelfPacedPolicy : public SelectionPolicy {
 public:
  SelfPacedPolicy(const LabeledDataset& labeled, const UnlabeledPool& pool, std::vector<int> minors, double lambda,
                  bool with_context)
      : labeled_(labeled), pool_(pool), minors_(std::move(minors)), lambda_(lambda), with_context_(with_context) {}

  RoundSelection select(int, const Mlp& classifier) override {
    RoundSelection out;
    if (with_context_) out.decisions = context_data_select(classifier, labeled_, minors_, lambda_);
    auto pooled = self_paced_select(classifier, pool_, minors_, lambda_);
    out.decisions.insert(out.decisions.end(), pooled.begin(), pooled.end());
    out.candidates = out.decisions.size();
    return out;
  }

 private:
  // The labeled set is copied; the pool is borrowed and must outlive the plan.
  LabeledDataset labeled_;
  const UnlabeledPool& pool_;
  std::vector<int> minors_;
  double lambda_;
  bool with_context_;
};

}  // namespace

std::vector<SelectionDecision> self_paced_select(const Mlp& classifier, const UnlabeledPool& pool,
                                                 std::span<const int> minors, double lambda) {
  std::vector<SelectionDecision> out;
  if (pool.size() == 0) return out;
  const auto pred = predict_with_confidence(classifier, pool.features());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int y = pred.top1[i];
    if (contains(minors, y) && pred.top1_loss(static_cast<Eigen::Index>(i)) < lambda)
      out.push_back({Source::Unlabeled, i, y, y, 1.0});
  }
  return out;
}

std::vector<SelectionDecision> context_data_select(const Mlp& classifier, const LabeledDataset& labeled,
                                                   std::span<const int> minors, double lambda) {
  std::vector<SelectionDecision> out;
  if (labeled.size() == 0) return out;
  const auto pred = predict_with_confidence(classifier, labeled.features());
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const int y = pred.top1[i];
    if (contains(minors, y) && pred.top1_loss(static_cast<Eigen::Index>(i)) < lambda)
      out.push_back({Source::Labeled, i, labeled.labels()[i], y, 1.0});
  }
  return out;
}

TrainingPlan strategy_imbalanced(const LabeledDataset& ds, const StrategyConfig& config) {
  config.validate();
  TrainingPlan plan;
  plan.base = ds;
  return plan;
}

TrainingPlan strategy_oversampling(const LabeledDataset& ds, const StrategyConfig& config, std::uint64_t seed) {
  config.validate();
  TrainingPlan plan;
  plan.base = oversample_to_balance(ds, seed);
  return plan;
}

TrainingPlan strategy_self_paced(const LabeledDataset& ds, const UnlabeledPool& pool, std::vector<int> minors,
                                 const StrategyConfig& config) {
  config.validate();
  TrainingPlan plan;
  plan.base = ds;
  plan.policy = std::make_unique<SelfPacedPolicy>(ds, pool, std::move(minors), config.lambda, false);
  return plan;
}

TrainingPlan strategy_context(const LabeledDataset& ds, const UnlabeledPool& pool, std::vector<int> minors,
                              const StrategyConfig& config) {
  config.validate();
  TrainingPlan plan;
  plan.base = ds;
  plan.policy = std::make_unique<SelfPacedPolicy>(ds, pool, std::move(minors), config.lambda, true);
  return plan;
}

std::size_t count_label_violations(std::span<const SelectionDecision> decisions, const LabeledDataset& labeled) {
  std::size_t bad = 0;
  for (const auto& d : decisions) {
    if (d.source == Source::Labeled) {
      if (d.index >= labeled.size() || d.assigned_label != labeled.labels()[d.index]) ++bad;
    } else if (d.assigned_label != d.predicted_label) {
      ++bad;
    }
  }
  return bad;
}

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Imbalanced: return "imbalanced";
    case StrategyKind::Oversample: return "oversample";
    case StrategyKind::SelfPaced: return "self_paced";
    case StrategyKind::Context: return "context";
    case StrategyKind::SelectNet: return "selectnet";
  }
  return "?";
}

std::optional<StrategyKind> parse_strategy(std::string_view name) {
  for (auto k : {StrategyKind::Imbalanced, StrategyKind::Oversample, StrategyKind::SelfPaced, StrategyKind::Context,
                 StrategyKind::SelectNet})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

}  // namespace selectnet
