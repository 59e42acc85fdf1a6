#pragma once

// Learned data selection. A small sigmoid network scores every candidate
// (a labeled or pool sample whose top-1 prediction is a minor class) from
// the classifier's output distribution and the sample's loss. The scorer is
// trained to minimise mean(score * (loss - lambda)), so it learns to favour
// candidates whose loss sits below lambda; candidates scoring above beta are
// added to the next round's training set.

#include <cstdint>
#include <span>
#include <vector>

#include "selectnet/data.hpp"
#include "selectnet/nn.hpp"
#include "selectnet/strategies.hpp"

namespace selectnet {

/// Selector input: the classifier's softmax output and the loss of the sample.
struct SelectionFeature {
  Vector class_probs;
  double loss = 0;
};

struct Candidate {
  Source source = Source::Unlabeled;
  std::size_t index = 0;
  int predicted_label = 0;
  int label = 0;  // true label for labeled samples, prediction for pool samples
  SelectionFeature feature;
};

/// Every sample of 𝒟 ∪ 𝒰 whose top-1 prediction is a minor class, labeled
/// samples first. Losses use the true label for labeled samples and the
/// prediction for pool samples.
std::vector<Candidate> build_candidates(const Mlp& classifier, const LabeledDataset& labeled,
                                        const UnlabeledPool& pool, std::span<const int> minors);

/// Candidates as selector inputs, one (m + 1)-wide row each.
Matrix selector_inputs(std::span<const Candidate> candidates);

class SelectNetModel {
 public:
  static constexpr int kHidden1 = 8;
  static constexpr int kHidden2 = 4;

  SelectNetModel() = default;
  /// (m + 1) -> 8 ReLU -> 4 ReLU -> 1 sigmoid.
  SelectNetModel(int num_classes, std::uint64_t seed);

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  int num_classes() const { return num_classes_; }

  /// Scores in (0, 1), one per input row.
  Vector score(const Matrix& inputs) const;
  Vector score(std::span<const Candidate> candidates) const;

 private:
  Mlp net_;
  int num_classes_ = 0;
};

struct SelectNetConfig {
  double lambda = 0.6;
  double beta = 0.6;
  int selector_steps = 200;
  double selector_lr = 0.05;
  double selector_momentum = 0.9;
  int selector_batch = 64;
  bool reinit_selector = false;
  int init_epochs = 10;  // oversampled warm start before the first round
  int round_epochs = 10;
  int rounds = 20;

  void validate() const;
  StrategyConfig strategy() const { return {lambda, round_epochs, rounds}; }
};

/// mean_i score(z_i) * (L_i - lambda); zero for an empty set.
double selector_objective(const SelectNetModel& selector, std::span<const Candidate> candidates, double lambda);

/// Seeded minibatch SGD on selector_objective. No-op for an empty set.
struct SelectorTraining {
  double objective_before = 0;
  double objective_after = 0;
};
SelectorTraining train_selector(SelectNetModel& selector, std::span<const Candidate> candidates, double lambda,
                                int steps, double lr, std::uint64_t seed, double momentum = 0.9,
                                int batch_size = 64);

/// Candidates scoring strictly above beta, with label discipline applied.
std::vector<SelectionDecision> threshold_select(const SelectNetModel& selector, std::span<const Candidate> candidates,
                                                double beta);

/// Full objective for a fixed selection vector f (one entry per candidate):
///   mean_D L(y, f_c(x)) + (1/n_add) sum_i [f_i L_i - lambda f_i],
/// with n_add the number of candidates with f_i > 0 and the second term zero
/// when nothing is selected.
double joint_objective(const Mlp& classifier, const LabeledDataset& labeled, const UnlabeledPool& pool,
                       std::span<const Candidate> candidates, std::span<const double> selection, double lambda);

TrainingPlan strategy_selectnet(const LabeledDataset& labeled, const UnlabeledPool& pool, std::vector<int> minors,
                                const SelectNetConfig& config, std::uint64_t seed);

/// Oversampled warm start, then per round: candidates, selector update,
/// thresholding, and round_epochs of classifier training on 𝒟 ∪ 𝒟_add.
TrainingResult run_selectnet(const LabeledDataset& labeled, const UnlabeledPool& pool, std::vector<int> minors,
                             const ClassifierConfig& classifier, const SelectNetConfig& config, std::uint64_t seed,
                             const RoundObserver& observer = {});

}  // namespace selectnet
