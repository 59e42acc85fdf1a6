#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "selectnet/nn.hpp"

namespace selectnet {

struct PoolGroundTruth;

/// Features (one sample per row) with dense integer labels in [0, num_classes).
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(Matrix features, std::vector<int> labels, int num_classes);

  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  int num_classes() const { return num_classes_; }
  std::size_t size() const { return labels_.size(); }
  Eigen::Index dim() const { return features_.cols(); }

  std::vector<std::size_t> class_counts() const;
  LabeledDataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b);

 private:
  Matrix features_;
  std::vector<int> labels_;
  int num_classes_ = 0;
};

/// Unlabeled samples. Ground-truth labels ride along for evaluation only and
/// are reachable solely through PoolGroundTruth (metrics.hpp).
class UnlabeledPool {
 public:
  UnlabeledPool() = default;
  UnlabeledPool(Matrix features, std::vector<int> hidden_labels, int num_classes);

  const Matrix& features() const { return features_; }
  std::size_t size() const { return static_cast<std::size_t>(features_.rows()); }
  int num_classes() const { return num_classes_; }

 private:
  friend struct PoolGroundTruth;

  Matrix features_;
  std::vector<int> hidden_labels_;
  int num_classes_ = 0;
};

struct ImbalanceSpec {
  std::vector<int> minor_classes;
  double minor_keep_fraction = 0.01;
  double major_keep_fraction = 0.90;
  std::uint64_t seed = 0;

  bool is_minor(int cls) const;
  void validate(int num_classes) const;
};

struct CarvedSplit {
  LabeledDataset labeled;
  UnlabeledPool pool;
  ImbalanceSpec spec;
};

/// Balanced Gaussian blobs with unit isotropic noise. Class c is centred at
/// separation * e_c when c < dim, otherwise at separation times a seeded
/// random unit vector.
LabeledDataset generate_gaussian_blobs(int num_classes, int per_class, int dim, double separation,
                                       std::uint64_t seed);

/// Two interleaved half circles in 2-D with Gaussian noise.
LabeledDataset generate_two_moons(int per_class, double noise, std::uint64_t seed);

/// Number of samples kept for a class of `count` at the given fraction
/// (ceiling, tolerant of representation error in the fraction).
std::size_t kept_count(double fraction, std::size_t count);

/// Keeps ceil(fraction * count) randomly chosen samples of each class as
/// labeled and sends the rest of the class to the pool.
CarvedSplit carve_imbalance(const LabeledDataset& source, const ImbalanceSpec& spec);

/// Pads every class up to the largest class by drawing with replacement from
/// that class. Originals come first, in their original order.
LabeledDataset oversample_to_balance(const LabeledDataset& ds, std::uint64_t seed);

/// A seeded permutation of [0, n) cut into batches of `batch_size`.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t seed, std::uint64_t epoch);

enum class DatasetFormat { Csv, Binary };

/// Picks the format from the extension: ".csv" is CSV, anything else binary.
DatasetFormat format_from_path(const std::filesystem::path& path);

LabeledDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path, DatasetFormat format);

}  // namespace selectnet
