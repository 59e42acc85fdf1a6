#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "selectnet/data.hpp"
#include "selectnet/nn.hpp"
#include "selectnet/strategies.hpp"

namespace selectnet {

/// The only reader of UnlabeledPool's hidden labels. Training code never
/// includes this header.
struct PoolGroundTruth {
  static std::span<const int> labels(const UnlabeledPool& pool) { return pool.hidden_labels_; }
};

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

  explicit ConfusionMatrix(int num_classes) : counts_(Counts::Zero(num_classes, num_classes)) {}
  explicit ConfusionMatrix(Counts counts);

  int num_classes() const { return static_cast<int>(counts_.rows()); }
  std::int64_t operator()(int truth, int predicted) const { return counts_(truth, predicted); }
  std::int64_t& operator()(int truth, int predicted) { return counts_(truth, predicted); }
  std::int64_t total() const { return counts_.sum(); }
  const Counts& counts() const { return counts_; }

 private:
  Counts counts_;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, int num_classes);

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::int64_t support = 0;
};

struct PerClassMetrics {
  std::vector<ClassMetrics> classes;
  double accuracy = 0;

  /// Mean recall over the listed classes.
  double mean_recall(std::span<const int> subset) const;
};

/// Precision, recall and F1 per class; any undefined ratio is reported as 0.
PerClassMetrics per_class_metrics(const ConfusionMatrix& cm);

/// Per-class metrics of a classifier on a labeled set.
PerClassMetrics evaluate(const Mlp& classifier, const LabeledDataset& data);

struct SelectionCounts {
  std::size_t labeled_confused = 0;
  std::size_t labeled_minor = 0;
  std::size_t unlabeled_confused = 0;
  std::size_t unlabeled_minor = 0;

  std::size_t total() const { return labeled_confused + labeled_minor + unlabeled_confused + unlabeled_minor; }
  friend bool operator==(const SelectionCounts&, const SelectionCounts&) = default;
};

/// Sorts each decision into one of four categories by comparing the
/// prediction recorded at selection time against the ground truth:
/// wrong -> *_confused, right -> *_minor.
SelectionCounts selection_counts(std::span<const SelectionDecision> decisions, const LabeledDataset& labeled,
                                 const UnlabeledPool& pool);

/// Ground-truth label of the sample a decision refers to.
int true_label(const SelectionDecision& decision, const LabeledDataset& labeled, const UnlabeledPool& pool);

}  // namespace selectnet
