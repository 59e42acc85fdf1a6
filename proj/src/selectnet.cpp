#include "selectnet/selectnet.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "selectnet/random.hpp"

namespace selectnet {

namespace {

bool contains(std::span<const int> set, int value) {
  return std::find(set.begin(), set.end(), value) != set.end();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t sub = 0) {
  auto rng = make_rng(seed, {stream_id, sub});
  return rng();
}

}  // namespace

std::vector<Candidate> build_candidates(const Mlp& classifier, const LabeledDataset& labeled,
                                        const UnlabeledPool& pool, std::span<const int> minors) {
  std::vector<Candidate> out;
  if (labeled.size() > 0) {
    const auto pred = predict_with_confidence(classifier, labeled.features());
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      const int y_hat = pred.top1[i];
      if (!contains(minors, y_hat)) continue;
      const auto r = static_cast<Eigen::Index>(i);
      const int y = labeled.labels()[i];
      Candidate c{Source::Labeled, i, y_hat, y, {}};
      c.feature.class_probs = pred.probs.row(r).transpose();
      c.feature.loss = -std::log(std::max(pred.probs(r, y), kProbabilityFloor));
      out.push_back(std::move(c));
    }
  }
  if (pool.size() > 0) {
    const auto pred = predict_with_confidence(classifier, pool.features());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const int y_hat = pred.top1[i];
      if (!contains(minors, y_hat)) continue;
      const auto r = static_cast<Eigen::Index>(i);
      Candidate c{Source::Unlabeled, i, y_hat, y_hat, {}};
      c.feature.class_probs = pred.probs.row(r).transpose();
      c.feature.loss = pred.top1_loss(r);
      out.push_back(std::move(c));
    }
  }
  return out;
}

Matrix selector_inputs(std::span<const Candidate> candidates) {
  if (candidates.empty()) return Matrix(0, 0);
  const auto m = candidates.front().feature.class_probs.size();
  Matrix x(static_cast<Eigen::Index>(candidates.size()), m + 1);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto& f = candidates[i].feature;
    if (f.class_probs.size() != m) throw InputError("candidates disagree on class count");
    x.row(r).head(m) = f.class_probs.transpose();
    x(r, m) = f.loss;
  }
  return x;
}

SelectNetModel::SelectNetModel(int num_classes, std::uint64_t seed) : num_classes_(num_classes) {
  if (num_classes < 2) throw ConfigError("selector needs at least two classes");
  const std::array<LayerSpec, 3> layers{{{kHidden1, Activation::ReLU},
                                         {kHidden2, Activation::ReLU},
                                         {1, Activation::Sigmoid}}};
  net_ = Mlp::build(num_classes + 1, layers, derive_seed(seed, stream::kSelectorInit));
}

Vector SelectNetModel::score(const Matrix& inputs) const {
  if (inputs.rows() == 0) return Vector(0);
  return predict(net_, inputs).col(0);
}

Vector SelectNetModel::score(std::span<const Candidate> candidates) const {
  return score(selector_inputs(candidates));
}

void SelectNetConfig::validate() const {
  if (!(lambda > 0)) throw ConfigError("lambda must be positive");
  if (!(beta > 0 && beta < 1)) throw ConfigError("beta must lie in (0, 1)");
  if (selector_steps < 0) throw ConfigError("selector_steps must be non-negative");
  if (!(selector_lr > 0)) throw ConfigError("selector_lr must be positive");
  if (selector_momentum < 0 || selector_momentum >= 1) throw ConfigError("selector_momentum must lie in [0, 1)");
  if (selector_batch < 1) throw ConfigError("selector_batch must be at least 1");
  if (init_epochs < 0) throw ConfigError("init_epochs must be non-negative");
  strategy().validate();
}

double selector_objective(const SelectNetModel& selector, std::span<const Candidate> candidates, double lambda) {
  if (candidates.empty()) return 0.0;
  const Vector s = selector.score(candidates);
  double total = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    total += s(static_cast<Eigen::Index>(i)) * (candidates[i].feature.loss - lambda);
  return total / static_cast<double>(candidates.size());
}

SelectorTraining train_selector(SelectNetModel& selector, std::span<const Candidate> candidates, double lambda,
                                int steps, double lr, std::uint64_t seed, double momentum, int batch_size) {
  SelectorTraining out;
  if (candidates.empty()) return out;
  out.objective_before = selector_objective(selector, candidates, lambda);

  const Matrix inputs = selector_inputs(candidates);
  Vector shifted(inputs.rows());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    shifted(static_cast<Eigen::Index>(i)) = candidates[i].feature.loss - lambda;

  Sgd<double> opt(SgdConfig{lr, momentum, batch_size, seed});
  const auto n = candidates.size();
  const auto bs = static_cast<std::size_t>(batch_size);
  std::uint64_t epoch = 0;
  std::vector<std::vector<std::size_t>> batches;
  std::size_t next = 0;
  for (int step = 0; step < steps; ++step) {
    if (next == batches.size()) {
      batches = minibatches(n, bs, derive_seed(seed, stream::kSelectorBatches), epoch++);
      next = 0;
    }
    const auto& batch = batches[next++];
    const auto b = static_cast<Eigen::Index>(batch.size());
    Matrix x(b, inputs.cols());
    Matrix grad(b, 1);
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto src = static_cast<Eigen::Index>(batch[static_cast<std::size_t>(i)]);
      x.row(i) = inputs.row(src);
      grad(i, 0) = shifted(src) / static_cast<double>(b);
    }
    const auto cache = forward(selector.net(), x);
    opt.step(selector.net(), backward(selector.net(), cache, grad));
  }
  out.objective_after = selector_objective(selector, candidates, lambda);
  return out;
}

std::vector<SelectionDecision> threshold_select(const SelectNetModel& selector, std::span<const Candidate> candidates,
                                                double beta) {
  std::vector<SelectionDecision> out;
  if (candidates.empty()) return out;
  const Vector s = selector.score(candidates);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!(s(static_cast<Eigen::Index>(i)) > beta)) continue;
    const auto& c = candidates[i];
    out.push_back({c.source, c.index, c.label, c.predicted_label, 1.0});
  }
  return out;
}

double joint_objective(const Mlp& classifier, const LabeledDataset& labeled, const UnlabeledPool& pool,
                       std::span<const Candidate> candidates, std::span<const double> selection, double lambda) {
  if (selection.size() != candidates.size()) throw InputError("selection and candidates differ in length");
  const Matrix probs = predict(classifier, labeled.features());
  const auto base = cross_entropy_loss(probs, one_hot<double>(labeled.labels(), classifier.output_dim()));

  // Candidate losses are recomputed against the current weights.
  Matrix x(static_cast<Eigen::Index>(candidates.size()), labeled.dim());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& src = c.source == Source::Labeled ? labeled.features() : pool.features();
    x.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(c.index));
  }
  std::vector<double> losses(candidates.size());
  if (!candidates.empty()) {
    const Matrix p = predict(classifier, x);
    for (std::size_t i = 0; i < candidates.size(); ++i)
      losses[i] = -std::log(std::max(p(static_cast<Eigen::Index>(i), candidates[i].label), kProbabilityFloor));
  }

  // The -lambda * f term shares the 1/n_add normaliser with the loss term.
  const std::vector<double> lambdas(candidates.size(), lambda);
  return base.mean + weighted_mean_loss<double>(losses, selection) - weighted_mean_loss<double>(lambdas, selection);
}

namespace {

class SelectNetPolicy : public SelectionPolicy {
 public:
  SelectNetPolicy(const LabeledDataset& labeled, const UnlabeledPool& pool, std::vector<int> minors,
                  const SelectNetConfig& config, std::uint64_t seed)
      : labeled_(labeled),
        pool_(pool),
        minors_(std::move(minors)),
        config_(config),
        seed_(seed),
        selector_(labeled.num_classes(), seed) {}

  RoundSelection select(int round, const Mlp& classifier) override {
    const auto candidates = build_candidates(classifier, labeled_, pool_, minors_);
    if (config_.reinit_selector)
      selector_ = SelectNetModel(labeled_.num_classes(), derive_seed(seed_, stream::kSelectorInit, round + 1));
    const auto trained = train_selector(selector_, candidates, config_.lambda, config_.selector_steps,
                                        config_.selector_lr, derive_seed(seed_, stream::kSelectorBatches, round),
                                        config_.selector_momentum, config_.selector_batch);
    RoundSelection out;
    out.decisions = threshold_select(selector_, candidates, config_.beta);
    out.candidates = candidates.size();
    if (!candidates.empty()) {
      out.selector_objective_before = trained.objective_before;
      out.selector_objective_after = trained.objective_after;
    }
    return out;
  }

 private:
  LabeledDataset labeled_;
  const UnlabeledPool& pool_;
  std::vector<int> minors_;
  SelectNetConfig config_;
  std::uint64_t seed_;
  SelectNetModel selector_;
};

}  // namespace

TrainingPlan strategy_selectnet(const LabeledDataset& labeled, const UnlabeledPool& pool, std::vector<int> minors,
                                const SelectNetConfig& config, std::uint64_t seed) {
  config.validate();
  for (int c : minors)
    if (c < 0 || c >= labeled.num_classes()) throw ConfigError("minor class out of range");
  TrainingPlan plan;
  plan.base = labeled;
  plan.warm_start = oversample_to_balance(labeled, seed);
  plan.warm_start_epochs = config.init_epochs;
  plan.policy = std::make_unique<SelectNetPolicy>(labeled, pool, std::move(minors), config, seed);
  return plan;
}

TrainingResult run_selectnet(const LabeledDataset& labeled, const UnlabeledPool& pool, std::vector<int> minors,
                             const ClassifierConfig& classifier, const SelectNetConfig& config, std::uint64_t seed,
                             const RoundObserver& observer) {
  classifier.validate();
  auto plan = strategy_selectnet(labeled, pool, std::move(minors), config, seed);
  return train_with_plan(std::move(plan), pool, config.strategy(), classifier, seed, observer);
}

}  // namespace selectnet
