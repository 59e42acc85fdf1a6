#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "selectnet/errors.hpp"
#include "selectnet/metrics.hpp"
#include "selectnet/selfcheck.hpp"
#include "selectnet/strategies.hpp"

using namespace selectnet;

namespace {

// Softmax over the raw features: feeding log-probabilities reproduces them.
Mlp passthrough_classifier(int m) {
  return Mlp::from_layers({DenseLayer<double>{Matrix::Identity(m, m), Vector::Zero(m), Activation::Softmax}});
}

// Row of log-probabilities that puts p on class `top` and spreads the rest.
Eigen::RowVectorXd log_probs(int m, int top, double p) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Constant(m, std::log((1.0 - p) / (m - 1)));
  row(top) = std::log(p);
  return row;
}

struct Blob {
  LabeledDataset labeled;
  UnlabeledPool pool;
};

Blob small_problem(std::uint64_t seed) {
  const auto src = generate_gaussian_blobs(4, 100, 4, 2.5, seed);
  auto split = carve_imbalance(src, ImbalanceSpec{{0, 2}, 0.05, 0.5, seed});
  return {split.labeled, split.pool};
}

StrategyConfig short_schedule() { return StrategyConfig{0.6, 2, 4}; }

ClassifierConfig small_classifier() {
  ClassifierConfig c;
  c.hidden = {8};
  c.sgd.batch_size = 16;
  return c;
}

}  // namespace

TEST_CASE("self-paced rule at the threshold") {
  const int m = 3;
  const std::vector<int> minors{0};
  Matrix x(3, m);
  x.row(0) = log_probs(m, 0, std::exp(-0.4));  // minor, loss 0.4
  x.row(1) = log_probs(m, 0, std::exp(-0.9));  // minor, loss 0.9
  x.row(2) = log_probs(m, 1, std::exp(-0.01));  // major, tiny loss
  const UnlabeledPool pool(x, {0, 0, 1}, m);
  const auto clf = passthrough_classifier(m);

  const auto picked = self_paced_select(clf, pool, minors, 0.6);
  REQUIRE(picked.size() == 1);
  CHECK(picked[0].index == 0);
  CHECK(picked[0].assigned_label == 0);
  CHECK(picked[0].source == Source::Unlabeled);

  const double loss = predict_with_confidence(clf, x).top1_loss(0);
  CHECK(loss == doctest::Approx(0.4));
  CHECK(self_paced_select(clf, pool, minors, loss).empty());
  CHECK(self_paced_select(clf, pool, minors, std::nextafter(loss, 1.0)).size() == 1);
}

TEST_CASE("context rule re-adds labeled samples with their true labels") {
  const int m = 3;
  const std::vector<int> minors{0};
  Matrix x(3, m);
  x.row(0) = log_probs(m, 0, std::exp(-0.3));  // true major 1, predicted minor
  x.row(1) = log_probs(m, 0, std::exp(-0.2));  // true minor
  x.row(2) = log_probs(m, 2, 0.95);            // predicted major
  const LabeledDataset labeled(x, {1, 0, 2}, m);
  const auto clf = passthrough_classifier(m);

  const auto picked = context_data_select(clf, labeled, minors, 0.6);
  REQUIRE(picked.size() == 2);
  CHECK(picked[0].index == 0);
  CHECK(picked[0].assigned_label == 1);
  CHECK(picked[0].predicted_label == 0);
  CHECK(picked[1].assigned_label == 0);
  CHECK(count_label_violations(picked, labeled) == 0);

  const LabeledDataset majors(x.bottomRows(1), {2}, m);
  CHECK(context_data_select(clf, majors, minors, 0.6).empty());
}

TEST_CASE("self-paced rule matches a brute-force filter") {
  const auto r = check_selection_rule(10, 300, 21);
  INFO(r.detail);
  CHECK(r.passed);
}

TEST_CASE("selection grows with lambda") {
  const auto p = small_problem(3);
  const std::vector<int> minors{0, 2};
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto clf = make_classifier(4, 4, small_classifier(), seed);
    std::set<std::size_t> prev;
    for (double lambda : {0.5, 1.0, 1.2, 1.4, 2.0, 5.0}) {
      std::set<std::size_t> cur;
      for (const auto& d : self_paced_select(clf, p.pool, minors, lambda)) cur.insert(d.index);
      CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = cur;
    }
  }
}

TEST_CASE("imbalanced strategy never augments and runs the full schedule") {
  const auto p = small_problem(1);
  const StrategyConfig cfg;
  CHECK(cfg.total_epochs() == 200);
  auto plan = strategy_imbalanced(p.labeled, short_schedule());
  CHECK(plan.base == p.labeled);
  const auto result = train_with_plan(std::move(plan), p.pool, short_schedule(), small_classifier(), 1);
  REQUIRE(result.rounds.size() == 4);
  for (const auto& r : result.rounds) {
    CHECK(r.decisions.empty());
    CHECK(r.train_size == p.labeled.size());
  }
  CHECK(result.rounds.back().epoch == short_schedule().total_epochs());
}

TEST_CASE("oversampling strategy balances the base set") {
  const auto p = small_problem(2);
  const auto plan = strategy_oversampling(p.labeled, short_schedule(), 5);
  const auto counts = plan.base.class_counts();
  const auto largest = *std::max_element(counts.begin(), counts.end());
  for (auto c : counts) CHECK(c == largest);
  CHECK(!plan.policy);

  const auto balanced = generate_gaussian_blobs(3, 10, 2, 2.0, 1);
  CHECK(strategy_oversampling(balanced, short_schedule(), 5).base == strategy_imbalanced(balanced, short_schedule()).base);
}

TEST_CASE("additions are rebuilt every round") {
  const auto p = small_problem(4);
  const std::vector<int> minors{0, 2};
  StrategyConfig cfg{1.2, 2, 5};
  std::vector<Mlp> after;
  const auto result = train_with_plan(strategy_self_paced(p.labeled, p.pool, minors, cfg), p.pool, cfg,
                                      small_classifier(), 3,
                                      [&](const RoundReport&, const Mlp& clf) { after.push_back(clf); });
  REQUIRE(result.rounds.size() == 5);
  CHECK(result.rounds[0].decisions.empty());
  std::size_t total = 0;
  for (std::size_t r = 1; r < result.rounds.size(); ++r) {
    auto expected = self_paced_select(after[r - 1], p.pool, minors, cfg.lambda);
    sort_canonical(expected);
    CHECK(result.rounds[r].decisions == expected);
    CHECK(result.rounds[r].train_size == p.labeled.size() + expected.size());
    total += expected.size();
  }
  CHECK(total > 0);
}

TEST_CASE("label discipline holds for every baseline selection") {
  const auto p = small_problem(6);
  const std::vector<int> minors{0, 2};
  StrategyConfig cfg{1.5, 2, 4};
  for (auto plan : {0, 1}) {
    auto tp = plan == 0 ? strategy_self_paced(p.labeled, p.pool, minors, cfg)
                        : strategy_context(p.labeled, p.pool, minors, cfg);
    const auto result = train_with_plan(std::move(tp), p.pool, cfg, small_classifier(), 2);
    for (const auto& r : result.rounds) {
      CHECK(count_label_violations(r.decisions, p.labeled) == 0);
      if (plan == 0)
        for (const auto& d : r.decisions) CHECK(d.source == Source::Unlabeled);
    }
  }
}

TEST_CASE("rounds with nothing selected still train") {
  const auto p = small_problem(7);
  StrategyConfig cfg{1e-9, 2, 3};
  const auto result = train_with_plan(strategy_self_paced(p.labeled, p.pool, {0, 2}, cfg), p.pool, cfg,
                                      small_classifier(), 1);
  for (const auto& r : result.rounds) {
    CHECK(r.decisions.empty());
    CHECK(std::isfinite(r.train_loss));
  }
}

TEST_CASE("two-term weighting") {
  const int m = 2;
  Matrix xb(3, 1);
  xb << 1, 2, 3;
  const LabeledDataset base(xb, {0, 1, 0}, m);
  Matrix xp(2, 1);
  xp << 4, 5;
  const UnlabeledPool pool(xp, {1, 1}, m);

  AugmentedTrainSet none{&base, &pool, {}};
  CHECK(none.materialize().scale == Vector::Ones(3));

  AugmentedTrainSet two{&base, &pool, {{Source::Unlabeled, 1, 1, 1, 1.0}, {Source::Labeled, 2, 0, 0, 1.0}}};
  const auto rows = two.materialize();
  REQUIRE(rows.labels.size() == 5);
  CHECK(rows.features(3, 0) == 5);
  CHECK(rows.features(4, 0) == 3);
  CHECK(rows.labels[3] == 1);
  // mean(scale * L) = mean_base(L) + mean_add(L) for arbitrary losses
  const Vector losses = (Vector(5) << 0.3, 1.1, 0.7, 2.0, 0.1).finished();
  const double lhs = rows.scale.cwiseProduct(losses).mean();
  const double rhs = (0.3 + 1.1 + 0.7) / 3 + (2.0 + 0.1) / 2;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  AugmentedTrainSet bad{&base, &pool, {{Source::Unlabeled, 9, 1, 1, 1.0}}};
  CHECK_THROWS_AS(bad.materialize(), UsageError);
}

TEST_CASE("training is reproducible") {
  const auto p = small_problem(8);
  auto run = [&] {
    return train_with_plan(strategy_self_paced(p.labeled, p.pool, {0, 2}, short_schedule()), p.pool,
                           short_schedule(), small_classifier(), 11);
  };
  const auto a = run(), b = run();
  for (std::size_t k = 0; k < a.classifier.num_layers(); ++k)
    CHECK(a.classifier.layers()[k].weights == b.classifier.layers()[k].weights);
  for (std::size_t r = 0; r < a.rounds.size(); ++r) CHECK(a.rounds[r].decisions == b.rounds[r].decisions);
}

TEST_CASE("label violations are counted") {
  const LabeledDataset labeled(Matrix::Zero(2, 1), {0, 1}, 2);
  const std::vector<SelectionDecision> d{{Source::Labeled, 0, 1, 1, 1.0},
                                         {Source::Labeled, 1, 1, 0, 1.0},
                                         {Source::Unlabeled, 0, 0, 1, 1.0},
                                         {Source::Unlabeled, 3, 1, 1, 1.0}};
  CHECK(count_label_violations(d, labeled) == 2);
}

TEST_CASE("strategy names") {
  for (auto k : {StrategyKind::Imbalanced, StrategyKind::Oversample, StrategyKind::SelfPaced, StrategyKind::Context,
                 StrategyKind::SelectNet})
    CHECK(parse_strategy(to_string(k)) == k);
  CHECK_FALSE(parse_strategy("smote"));
}

TEST_CASE("invalid schedules") {
  CHECK_THROWS_AS(StrategyConfig({0.6, 0, 20}).validate(), ConfigError);
  CHECK_THROWS_AS(StrategyConfig({0.6, 10, 0}).validate(), ConfigError);
  CHECK_THROWS_AS(StrategyConfig({-1, 10, 20}).validate(), ConfigError);
}
