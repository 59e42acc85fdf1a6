#include "selectnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "selectnet/random.hpp"

namespace selectnet {

LabeledDataset::LabeledDataset(Matrix features, std::vector<int> labels, int num_classes)
    : features_(std::move(features)), labels_(std::move(labels)), num_classes_(num_classes) {
  if (num_classes_ < 1) throw InputError("dataset needs at least one class");
  if (static_cast<std::size_t>(features_.rows()) != labels_.size())
    throw InputError("feature rows and label count differ");
  for (int y : labels_)
    if (y < 0 || y >= num_classes_)
      throw InputError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes_) + ")");
  if (!features_.allFinite()) throw InputError("features contain non-finite values");
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  Matrix f(static_cast<Eigen::Index>(indices.size()), features_.cols());
  std::vector<int> y;
  y.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= labels_.size()) throw InputError("subset index out of range");
    f.row(static_cast<Eigen::Index>(i)) = features_.row(static_cast<Eigen::Index>(indices[i]));
    y.push_back(labels_[indices[i]]);
  }
  return LabeledDataset(std::move(f), std::move(y), num_classes_);
}

bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
  return a.num_classes_ == b.num_classes_ && a.labels_ == b.labels_ &&
         a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
         a.features_ == b.features_;
}

UnlabeledPool::UnlabeledPool(Matrix features, std::vector<int> hidden_labels, int num_classes)
    : features_(std::move(features)), hidden_labels_(std::move(hidden_labels)), num_classes_(num_classes) {
  if (static_cast<std::size_t>(features_.rows()) != hidden_labels_.size())
    throw InputError("pool feature rows and hidden label count differ");
}

bool ImbalanceSpec::is_minor(int cls) const {
  return std::find(minor_classes.begin(), minor_classes.end(), cls) != minor_classes.end();
}

void ImbalanceSpec::validate(int num_classes) const {
  if (minor_classes.empty()) throw ConfigError("at least one minor class is required");
  for (int c : minor_classes)
    if (c < 0 || c >= num_classes) throw ConfigError("minor class " + std::to_string(c) + " out of range");
  std::vector<int> sorted = minor_classes;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("duplicate minor class");
  if (static_cast<int>(sorted.size()) >= num_classes)
    throw ConfigError("minor classes must be a strict subset of all classes");
  auto valid = [](double f) { return f > 0.0 && f <= 1.0; };
  if (!valid(minor_keep_fraction) || !valid(major_keep_fraction))
    throw ConfigError("keep fractions must lie in (0, 1]");
}

LabeledDataset generate_gaussian_blobs(int num_classes, int per_class, int dim, double separation,
                                       std::uint64_t seed) {
  if (num_classes < 2) throw InputError("need at least two classes");
  if (per_class < 1) throw InputError("need at least one sample per class");
  if (dim < 1) throw InputError("dimension must be positive");
  if (!(separation > 0)) throw InputError("separation must be positive");

  auto rng = make_rng(seed, {stream::kGenerator});
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix centers = Matrix::Zero(num_classes, dim);
  for (int c = 0; c < num_classes; ++c) {
    if (c < dim) {
      centers(c, c) = separation;
    } else {
      Vector v(dim);
      for (int j = 0; j < dim; ++j) v(j) = normal(rng);
      centers.row(c) = separation * v.normalized().transpose();
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(num_classes) * per_class;
  Matrix x(n, dim);
  std::vector<int> y(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < per_class; ++i, ++row) {
      for (int j = 0; j < dim; ++j) x(row, j) = centers(c, j) + normal(rng);
      y[static_cast<std::size_t>(row)] = c;
    }
  }
  return LabeledDataset(std::move(x), std::move(y), num_classes);
}

LabeledDataset generate_two_moons(int per_class, double noise, std::uint64_t seed) {
  if (per_class < 1) throw InputError("need at least one sample per class");
  auto rng = make_rng(seed, {stream::kGenerator});
  std::normal_distribution<double> normal(0.0, noise > 0 ? noise : 1.0);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  Matrix x(2 * per_class, 2);
  std::vector<int> y(static_cast<std::size_t>(2 * per_class));
  for (int i = 0; i < 2 * per_class; ++i) {
    const int c = i < per_class ? 0 : 1;
    const double t = angle(rng);
    double px = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double py = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
    if (noise > 0) {
      px += normal(rng);
      py += normal(rng);
    }
    x(i, 0) = px;
    x(i, 1) = py;
    y[static_cast<std::size_t>(i)] = c;
  }
  return LabeledDataset(std::move(x), std::move(y), 2);
}

std::size_t kept_count(double fraction, std::size_t count) {
  const double raw = fraction * static_cast<double>(count);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

CarvedSplit carve_imbalance(const LabeledDataset& source, const ImbalanceSpec& spec) {
  spec.validate(source.num_classes());
  const auto m = static_cast<std::size_t>(source.num_classes());

  std::vector<std::vector<std::size_t>> by_class(m);
  for (std::size_t i = 0; i < source.size(); ++i)
    by_class[static_cast<std::size_t>(source.labels()[i])].push_back(i);

  auto rng = make_rng(spec.seed, {stream::kCarve});
  std::vector<std::size_t> keep, pooled;
  for (std::size_t c = 0; c < m; ++c) {
    auto& idx = by_class[c];
    const double fraction =
        spec.is_minor(static_cast<int>(c)) ? spec.minor_keep_fraction : spec.major_keep_fraction;
    const std::size_t k = kept_count(fraction, idx.size());
    if (k == 0)
      throw InputError("keep fraction leaves class " + std::to_string(c) + " with no labeled samples");
    std::shuffle(idx.begin(), idx.end(), rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    pooled.insert(pooled.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  std::sort(pooled.begin(), pooled.end());

  Matrix pool_x(static_cast<Eigen::Index>(pooled.size()), source.dim());
  std::vector<int> pool_y;
  pool_y.reserve(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    pool_x.row(static_cast<Eigen::Index>(i)) = source.features().row(static_cast<Eigen::Index>(pooled[i]));
    pool_y.push_back(source.labels()[pooled[i]]);
  }
  return CarvedSplit{source.subset(keep), UnlabeledPool(std::move(pool_x), std::move(pool_y), source.num_classes()),
                     spec};
}

LabeledDataset oversample_to_balance(const LabeledDataset& ds, std::uint64_t seed) {
  const auto counts = ds.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0) throw InputError("class " + std::to_string(c) + " is empty, cannot oversample");
  const std::size_t target = *std::max_element(counts.begin(), counts.end());

  std::vector<std::vector<std::size_t>> by_class(counts.size());
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels()[i])].push_back(i);

  std::vector<std::size_t> indices(ds.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  auto rng = make_rng(seed, {stream::kOversample});
  for (std::size_t c = 0; c < counts.size(); ++c) {
    std::uniform_int_distribution<std::size_t> pick(0, by_class[c].size() - 1);
    for (std::size_t k = counts[c]; k < target; ++k) indices.push_back(by_class[c][pick(rng)]);
  }
  return ds.subset(indices);
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                  std::uint64_t epoch) {
  if (batch_size == 0) throw InputError("batch size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed, {stream::kBatches, epoch});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace selectnet
