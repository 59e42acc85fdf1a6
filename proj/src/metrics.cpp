#include "selectnet/metrics.hpp"

#include <string>

namespace selectnet {

ConfusionMatrix::ConfusionMatrix(Counts counts) : counts_(std::move(counts)) {
  if (counts_.rows() != counts_.cols()) throw InputError("confusion matrix must be square");
  if ((counts_.array() < 0).any()) throw InputError("confusion counts must be non-negative");
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
  if (truth.size() != predicted.size()) throw InputError("truth and prediction lengths differ");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw InputError("label out of range at position " + std::to_string(i));
    ++cm(t, p);
  }
  return cm;
}

double PerClassMetrics::mean_recall(std::span<const int> subset) const {
  if (subset.empty()) return 0.0;
  double sum = 0;
  for (int c : subset) sum += classes.at(static_cast<std::size_t>(c)).recall;
  return sum / static_cast<double>(subset.size());
}

PerClassMetrics per_class_metrics(const ConfusionMatrix& cm) {
  const auto& n = cm.counts();
  const int m = cm.num_classes();
  PerClassMetrics out;
  out.classes.resize(static_cast<std::size_t>(m));
  for (int c = 0; c < m; ++c) {
    const auto tp = static_cast<double>(n(c, c));
    const auto predicted = static_cast<double>(n.col(c).sum());
    const auto actual = n.row(c).sum();
    auto& k = out.classes[static_cast<std::size_t>(c)];
    k.support = actual;
    k.precision = predicted > 0 ? tp / predicted : 0.0;
    k.recall = actual > 0 ? tp / static_cast<double>(actual) : 0.0;
    k.f1 = k.precision + k.recall > 0 ? 2 * k.precision * k.recall / (k.precision + k.recall) : 0.0;
  }
  const auto total = cm.total();
  out.accuracy = total > 0 ? static_cast<double>(n.trace()) / static_cast<double>(total) : 0.0;
  return out;
}

PerClassMetrics evaluate(const Mlp& classifier, const LabeledDataset& data) {
  const auto predicted = argmax_rows(predict(classifier, data.features()));
  return per_class_metrics(confusion(data.labels(), predicted, data.num_classes()));
}

int true_label(const SelectionDecision& decision, const LabeledDataset& labeled, const UnlabeledPool& pool) {
  if (decision.source == Source::Labeled) {
    if (decision.index >= labeled.size()) throw std::logic_error("decision refers to a missing labeled sample");
    return labeled.labels()[decision.index];
  }
  const auto hidden = PoolGroundTruth::labels(pool);
  if (decision.index >= hidden.size()) throw std::logic_error("decision refers to a missing pool sample");
  return hidden[decision.index];
}

SelectionCounts selection_counts(std::span<const SelectionDecision> decisions, const LabeledDataset& labeled,
                                 const UnlabeledPool& pool) {
  SelectionCounts counts;
  for (const auto& d : decisions) {
    const bool correct = d.predicted_label == true_label(d, labeled, pool);
    if (d.source == Source::Labeled)
      ++(correct ? counts.labeled_minor : counts.labeled_confused);
    else
      ++(correct ? counts.unlabeled_minor : counts.unlabeled_confused);
  }
  return counts;
}

}  // namespace selectnet
