#include "selectnet/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "selectnet/data.hpp"
#include "selectnet/nn.hpp"
#include "selectnet/random.hpp"
#include "selectnet/selectnet.hpp"
#include "selectnet/strategies.hpp"

namespace selectnet {

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

enum class Head { Softmax, Sigmoid, Identity };

// Scalar loss used for the gradient check and its gradient w.r.t. the output.
struct HeadLoss {
  Head head;
  Matrix target;  // one-hot for softmax, arbitrary otherwise

  double value(const Matrix& out) const {
    switch (head) {
      case Head::Softmax: return cross_entropy_loss(out, target).mean;
      case Head::Sigmoid: return (out.array() * target.array()).sum() / static_cast<double>(out.rows());
      case Head::Identity: return 0.5 * (out - target).squaredNorm() / static_cast<double>(out.rows());
    }
    return 0;
  }

  Matrix grad(const Matrix& out) const {
    const double n = static_cast<double>(out.rows());
    switch (head) {
      case Head::Softmax: {
        // Through the generic backward path: dL/dp = -y / p / n.
        return (-target.array() / out.array() / n).matrix();
      }
      case Head::Sigmoid: return target / n;
      case Head::Identity: return (out - target) / n;
    }
    return out;
  }
};

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-7});
}

// Naive forward pass with plain loops, independent of the Eigen path.
std::vector<double> naive_forward(const Mlp& model, const std::vector<double>& x) {
  std::vector<double> a = x;
  for (const auto& layer : model.layers()) {
    std::vector<double> z(static_cast<std::size_t>(layer.out_dim()));
    for (Eigen::Index o = 0; o < layer.out_dim(); ++o) {
      double s = layer.bias(o);
      for (Eigen::Index i = 0; i < layer.in_dim(); ++i) s += layer.weights(o, i) * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = s;
    }
    switch (layer.activation) {
      case Activation::Identity: break;
      case Activation::ReLU:
        for (auto& v : z) v = v > 0 ? v : 0;
        break;
      case Activation::Sigmoid:
        for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
        break;
      case Activation::Softmax: {
        const double mx = *std::max_element(z.begin(), z.end());
        double sum = 0;
        for (auto& v : z) sum += (v = std::exp(v - mx));
        for (auto& v : z) v /= sum;
        break;
      }
    }
    a = std::move(z);
  }
  return a;
}

}  // namespace

CheckResult check_gradients(int nets, std::uint64_t seed) {
  Timer timer;
  CheckResult result{"gradient oracle", true, "", 0};
  auto rng = make_rng(seed);
  std::uniform_int_distribution<int> width(2, 6), depth(1, 2), in_dim(2, 4), head_pick(0, 2), hidden_act(0, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = 1e-5;
  double worst = 0;
  std::size_t checked = 0;

  for (int t = 0; t < nets; ++t) {
    Mlp model;
    const int input = in_dim(rng);
    const auto head = static_cast<Head>(head_pick(rng));
    for (int attempt = 0;; ++attempt) {
      std::vector<LayerSpec> specs;
      const int hidden = depth(rng);
      for (int k = 0; k < hidden; ++k)
        specs.push_back({width(rng), hidden_act(rng) == 0 ? Activation::ReLU : Activation::Sigmoid});
      const int out = head == Head::Softmax ? width(rng) : std::max(1, width(rng) - 2);
      specs.push_back({out, head == Head::Softmax   ? Activation::Softmax
                            : head == Head::Sigmoid ? Activation::Sigmoid
                                                    : Activation::Identity});
      model = Mlp::build(input, specs, rng());
      if (model.parameter_count() <= 200) break;
    }
    // Non-zero biases so ReLU units are not all aligned at the origin.
    for (std::size_t k = 0; k < model.num_layers(); ++k)
      for (Eigen::Index i = 0; i < model.layers()[k].bias.size(); ++i) model.layer(k).bias(i) = 0.1 * normal(rng);

    const int batch = 3;
    Matrix x(batch, input);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    HeadLoss loss{head, Matrix::Zero(batch, model.output_dim())};
    if (head == Head::Softmax) {
      std::uniform_int_distribution<int> cls(0, static_cast<int>(model.output_dim()) - 1);
      for (int i = 0; i < batch; ++i) loss.target(i, cls(rng)) = 1.0;
    } else {
      for (Eigen::Index i = 0; i < loss.target.size(); ++i) loss.target.data()[i] = normal(rng);
    }

    const auto cache = forward(model, x);
    const auto grads = backward(model, cache, loss.grad(cache.output()));
    // Fused route must agree for softmax heads as well.
    std::optional<Gradients<double>> fused;
    if (head == Head::Softmax) {
      const Vector w = Vector::Constant(batch, 1.0 / batch);
      fused = softmax_cross_entropy_backward(model, cache, loss.target, w);
    }

    auto numeric = [&](auto&& param) {
      const double saved = param();
      param() = saved + h;
      const double up = loss.value(predict(model, x));
      param() = saved - h;
      const double down = loss.value(predict(model, x));
      param() = saved;
      return (up - down) / (2 * h);
    };
    for (std::size_t k = 0; k < model.num_layers(); ++k) {
      const auto rows = model.layers()[k].weights.rows(), cols = model.layers()[k].weights.cols();
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          const double num = numeric([&]() -> double& { return model.layer(k).weights(r, c); });
          worst = std::max(worst, rel_error(grads.weights[k](r, c), num));
          if (fused) worst = std::max(worst, rel_error(fused->weights[k](r, c), num));
          ++checked;
        }
        const double num = numeric([&]() -> double& { return model.layer(k).bias(r); });
        worst = std::max(worst, rel_error(grads.bias[k](r), num));
        if (fused) worst = std::max(worst, rel_error(fused->bias[k](r), num));
        ++checked;
      }
    }
  }
  result.passed = worst < 1e-4;
  std::ostringstream d;
  d << nets << " nets, " << checked << " parameters, max relative error " << worst;
  result.detail = d.str();
  result.seconds = timer.seconds();
  return result;
}

CheckResult check_selection_rule(int states, int pool_size, std::uint64_t seed) {
  Timer timer;
  CheckResult result{"selection-rule oracle", true, "", 0};
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> lambda_dist(0.1, 1.5), scale_dist(0.5, 4.0);
  const int dim = 4, m = 5;

  Matrix x(pool_size, dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 2.0 * normal(rng);
  const UnlabeledPool pool(x, std::vector<int>(static_cast<std::size_t>(pool_size), 0), m);

  std::size_t mismatches = 0, total_selected = 0;
  for (int s = 0; s < states; ++s) {
    const std::vector<LayerSpec> specs{{8, Activation::ReLU}, {m, Activation::Softmax}};
    Mlp model = Mlp::build(dim, specs, rng());
    const double scale = scale_dist(rng);
    for (std::size_t k = 0; k < model.num_layers(); ++k) model.layer(k).weights *= scale;
    std::vector<int> minors;
    for (int c = 0; c < m; ++c)
      if (normal(rng) > 0) minors.push_back(c);
    if (minors.empty()) minors.push_back(0);
    const double lambda = lambda_dist(rng);

    std::set<std::size_t> expected;
    for (int i = 0; i < pool_size; ++i) {
      std::vector<double> row(x.row(i).data(), x.row(i).data() + dim);
      const auto p = naive_forward(model, row);
      int top = 0;
      for (int c = 1; c < m; ++c)
        if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(top)]) top = c;
      const double loss = -std::log(std::max(p[static_cast<std::size_t>(top)], 1e-12));
      if (std::find(minors.begin(), minors.end(), top) != minors.end() && loss < lambda)
        expected.insert(static_cast<std::size_t>(i));
    }
    std::set<std::size_t> actual;
    for (const auto& d : self_paced_select(model, pool, minors, lambda)) actual.insert(d.index);
    if (actual != expected) ++mismatches;
    total_selected += actual.size();
  }
  result.passed = mismatches == 0;
  std::ostringstream d;
  d << states << " states, " << mismatches << " mismatching, " << total_selected << " selections in total";
  result.detail = d.str();
  result.seconds = timer.seconds();
  return result;
}

CheckResult check_oversampling(int trials, std::uint64_t seed) {
  Timer timer;
  CheckResult result{"oversampling exactness", true, "", 0};
  auto rng = make_rng(seed);
  std::uniform_int_distribution<int> classes(2, 6), count(1, 60);
  int failures = 0;
  for (int t = 0; t < trials; ++t) {
    const int m = classes(rng);
    std::vector<int> labels;
    for (int c = 0; c < m; ++c) {
      const int n = count(rng);
      labels.insert(labels.end(), static_cast<std::size_t>(n), c);
    }
    std::shuffle(labels.begin(), labels.end(), rng);
    // Feature = original row id, so every output row identifies its source.
    Matrix x(static_cast<Eigen::Index>(labels.size()), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = static_cast<double>(i);
    const LabeledDataset ds(x, labels, m);
    const auto out = oversample_to_balance(ds, rng());

    const auto before = ds.class_counts();
    const auto target = *std::max_element(before.begin(), before.end());
    bool ok = true;
    for (auto c : out.class_counts()) ok &= c == target;
    std::vector<int> seen(labels.size(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto src = static_cast<std::size_t>(out.features()(static_cast<Eigen::Index>(i), 0));
      ok &= src < labels.size() && labels[src] == out.labels()[i];
      if (src < labels.size()) ++seen[src];
    }
    for (int s : seen) ok &= s >= 1;
    if (!ok) ++failures;
  }
  result.passed = failures == 0;
  result.detail = std::to_string(trials) + " count vectors, " + std::to_string(failures) + " failures";
  result.seconds = timer.seconds();
  return result;
}

CheckResult check_selector_sign(int seeds, std::uint64_t seed) {
  Timer timer;
  CheckResult result{"selector sign property", true, "", 0};
  const SelectNetConfig defaults;
  const double lambda = 0.6;
  const int m = 10, n = 200;
  std::ostringstream d;
  for (int s = 0; s < seeds; ++s) {
    auto rng = make_rng(seed, {static_cast<std::uint64_t>(s)});
    std::uniform_int_distribution<int> coin(0, 1), cls(0, m - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Candidate> candidates;
    for (int i = 0; i < n; ++i) {
      const double loss = coin(rng) ? 0.1 : 1.5;
      const int y = cls(rng);
      Vector p(m);
      for (int c = 0; c < m; ++c) p(c) = unit(rng);
      p(y) = 0;
      p *= (1.0 - std::exp(-loss)) / p.sum();
      p(y) = std::exp(-loss);
      candidates.push_back({Source::Unlabeled, static_cast<std::size_t>(i), y, y, {p, loss}});
    }
    SelectNetModel selector(m, rng());
    const auto trained = train_selector(selector, candidates, lambda, defaults.selector_steps, defaults.selector_lr,
                                        rng(), defaults.selector_momentum, defaults.selector_batch);
    const Vector score = selector.score(candidates);
    double low = 0, high = 0;
    int n_low = 0, n_high = 0;
    for (int i = 0; i < n; ++i) {
      if (candidates[static_cast<std::size_t>(i)].feature.loss < lambda) {
        low += score(i);
        ++n_low;
      } else {
        high += score(i);
        ++n_high;
      }
    }
    const double gap = low / std::max(1, n_low) - high / std::max(1, n_high);
    const bool ok = gap >= 0.3 && trained.objective_after < trained.objective_before;
    result.passed &= ok;
    d << (s ? "; " : "") << "seed " << s << ": gap " << gap << ", objective " << trained.objective_before << " -> "
      << trained.objective_after;
  }
  result.detail = d.str();
  result.seconds = timer.seconds();
  return result;
}

CheckResult check_carving() {
  Timer timer;
  CheckResult result{"carving arithmetic", true, "", 0};
  const int m = 10, per_class = 5000;
  Matrix x(m * per_class, 1);
  std::vector<int> y;
  for (int c = 0; c < m; ++c) y.insert(y.end(), per_class, c);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = static_cast<double>(i);
  const LabeledDataset source(x, y, m);
  const ImbalanceSpec spec{{0, 2, 6, 7}, 0.01, 0.90, 3};
  const auto split = carve_imbalance(source, spec);
  const auto counts = split.labeled.class_counts();
  bool ok = split.pool.size() + split.labeled.size() == source.size();
  std::size_t minor = 0, major = 0;
  for (int c = 0; c < m; ++c) {
    const auto n = counts[static_cast<std::size_t>(c)];
    if (spec.is_minor(c)) {
      ok &= n == 50;
      minor = n;
    } else {
      ok &= n == 4500;
      major = n;
    }
  }
  ok &= minor > 0 && major == 90 * minor;
  result.passed = ok;
  result.detail = "labeled minor " + std::to_string(minor) + ", labeled major " + std::to_string(major) +
                  ", ratio " + std::to_string(minor ? major / minor : 0);
  result.seconds = timer.seconds();
  return result;
}

std::vector<CheckResult> run_selfchecks() {
  return {check_gradients(), check_selection_rule(), check_oversampling(), check_selector_sign(), check_carving()};
}

}  // namespace selectnet
