#pragma once

// Baseline training strategies (imbalanced, oversampling, self-paced,
// context data) and the round-based driver they share with SelectNet.
//
// Every strategy is expressed as a TrainingPlan: a base labeled set, an
// optional warm-start set, and a selection policy that is asked, at the start
// of each round, which extra samples to train on for that round. Additions do
// not carry over between rounds.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selectnet/data.hpp"
#include "selectnet/nn.hpp"

namespace selectnet {

enum class Source { Labeled, Unlabeled };

/// One sample admitted to the augmentation set of a round. Labeled samples
/// carry their true label; pool samples carry the classifier's top-1
/// prediction at selection time.
struct SelectionDecision {
  Source source = Source::Unlabeled;
  std::size_t index = 0;
  int assigned_label = 0;
  int predicted_label = 0;
  double weight = 1.0;

  friend bool operator==(const SelectionDecision&, const SelectionDecision&) = default;
};

/// Canonical order: labeled before unlabeled, then by index.
void sort_canonical(std::vector<SelectionDecision>& decisions);

struct StrategyConfig {
  double lambda = 0.6;
  int round_epochs = 10;
  int rounds = 20;

  int total_epochs() const { return round_epochs * rounds; }
  void validate() const;
};

struct ClassifierConfig {
  std::vector<int> hidden{32};
  SgdConfig sgd;

  void validate() const;
};

/// Softmax classifier with the configured hidden ReLU layers.
Mlp make_classifier(int input_dim, int num_classes, const ClassifierConfig& config, std::uint64_t seed);

/// Top-1 class (lowest id on ties) and the loss of that prediction,
/// -log max(p_top1, floor).
struct Prediction {
  Matrix probs;
  std::vector<int> top1;
  Vector top1_loss;
};
Prediction predict_with_confidence(const Mlp& classifier, const Matrix& features);

/// Rows fed to SGD with per-sample loss scales.
struct TrainingRows {
  Matrix features;
  std::vector<int> labels;
  Vector scale;
};

/// 𝒟 plus the round's additions. materialize() applies the two-term
/// objective: the base term averages over |𝒟| and the addition term over
/// |𝒟_add|, expressed as per-row scales relative to a plain mean over all rows.
struct AugmentedTrainSet {
  const LabeledDataset* base = nullptr;
  const UnlabeledPool* pool = nullptr;
  std::vector<SelectionDecision> additions;

  std::size_t size() const { return base->size() + additions.size(); }
  TrainingRows materialize() const;
};

class ClassifierTrainer {
 public:
  ClassifierTrainer(Mlp model, const SgdConfig& sgd, std::uint64_t seed);

  /// Runs `epochs` passes of seeded minibatch SGD over the rows.
  /// Returns the scaled mean loss of the last epoch.
  double train_epochs(const TrainingRows& rows, int epochs);

  const Mlp& model() const { return model_; }
  int epochs_done() const { return epochs_done_; }

 private:
  Mlp model_;
  Sgd<double> optimizer_;
  std::uint64_t seed_;
  int epochs_done_ = 0;
};

struct RoundSelection {
  std::vector<SelectionDecision> decisions;
  std::size_t candidates = 0;
  std::optional<double> selector_objective_before;
  std::optional<double> selector_objective_after;
};

class SelectionPolicy {
 public:
  virtual ~SelectionPolicy() = default;
  virtual RoundSelection select(int round, const Mlp& classifier) = 0;
};

struct RoundReport {
  int round = 0;
  int epoch = 0;  // cumulative round epochs after this round
  std::vector<SelectionDecision> decisions;
  std::size_t candidates = 0;
  std::size_t train_size = 0;
  double train_loss = 0;
  std::optional<double> selector_objective_before;
  std::optional<double> selector_objective_after;
};

struct TrainingPlan {
  LabeledDataset base;
  std::optional<LabeledDataset> warm_start;
  int warm_start_epochs = 0;
  std::unique_ptr<SelectionPolicy> policy;  // null: never augment
};

struct TrainingResult {
  Mlp classifier;
  std::vector<RoundReport> rounds;
};

using RoundObserver = std::function<void(const RoundReport&, const Mlp&)>;

/// Shared round loop: optional warm start, then for each round ask the policy
/// for additions (only once the classifier has been trained at least one
/// epoch), build 𝒟 ∪ 𝒟_add and train round_epochs epochs.
TrainingResult train_with_plan(TrainingPlan plan, const UnlabeledPool& pool, const StrategyConfig& config,
                               const ClassifierConfig& classifier, std::uint64_t seed,
                               const RoundObserver& observer = {});

/// Pool samples predicted as a minor class whose loss against that
/// prediction is strictly below lambda. Labels are the predictions.
std::vector<SelectionDecision> self_paced_select(const Mlp& classifier, const UnlabeledPool& pool,
                                                 std::span<const int> minors, double lambda);

/// Labeled samples predicted as a minor class with prediction loss strictly
/// below lambda, re-added with their true labels.
std::vector<SelectionDecision> context_data_select(const Mlp& classifier, const LabeledDataset& labeled,
                                                   std::span<const int> minors, double lambda);

TrainingPlan strategy_imbalanced(const LabeledDataset& ds, const StrategyConfig& config);
TrainingPlan strategy_oversampling(const LabeledDataset& ds, const StrategyConfig& config, std::uint64_t seed);
TrainingPlan strategy_self_paced(const LabeledDataset& ds, const UnlabeledPool& pool, std::vector<int> minors,
                                 const StrategyConfig& config);
TrainingPlan strategy_context(const LabeledDataset& ds, const UnlabeledPool& pool, std::vector<int> minors,
                              const StrategyConfig& config);

/// Decisions that break label discipline: labeled rows must carry the true
/// label, pool rows the recorded prediction.
std::size_t count_label_violations(std::span<const SelectionDecision> decisions, const LabeledDataset& labeled);

enum class StrategyKind { Imbalanced, Oversample, SelfPaced, Context, SelectNet };

std::string to_string(StrategyKind kind);
std::optional<StrategyKind> parse_strategy(std::string_view name);

}  // namespace selectnet
