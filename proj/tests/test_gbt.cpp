#include <doctest.h>

#include "flowcll/models/error.hpp"
#include "flowcll/models/gbt.hpp"
#include "flowcll/models/model_io.hpp"
#include "flowcll/models/split_search.hpp"
#include "flowcll/parallel.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace flowcll;
using namespace flowcll::models;
using namespace testsupport;

namespace {

ModelErrc model_code(auto&& f) {
  try {
    f();
  } catch (const ModelError& e) {
    return e.code();
  }
  FAIL("expected a ModelError");
  return ModelErrc::MalformedModel;
}

ToyData separable_1d(std::size_t n) {
  ToyData t;
  for (std::size_t i = 0; i < n; ++i) {
    const float x = static_cast<float>(i) - static_cast<float>(n) / 2.0f + 0.5f;
    t.rows.push_back({x});
    t.labels.push_back(x > 0 ? 1 : 0);
  }
  return t;
}

} // namespace

TEST_CASE("leaf weight of four positives at round one is +1") {
  // p = 0.5 everywhere: g = -0.5, h = 0.25, so G = -2, H = 1.
  ToyData t;
  t.rows = {{0}, {0}, {0}, {0}, {1}, {1}};
  t.labels = {1, 1, 1, 1, 0, 0};
  GbtParams p;
  p.n_trees = 1;
  p.max_depth = 1;
  p.min_child_weight = 0.0;
  const auto m = gbt_train(t.set(), p, 0);
  const auto& tree = m.trees.at(0);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.nodes[0].feature == 0);
  CHECK(tree.nodes[0].threshold == 0.5);
  CHECK(tree.predict(std::vector<float>{0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tree.predict(std::vector<float>{1}) == doctest::Approx(-1.0 / 1.5).epsilon(1e-15));
}

TEST_CASE("separable one-feature data") {
  const auto t = separable_1d(10);
  const auto m = gbt_train(t.set(), GbtParams{}, 0);
  CHECK(m.trees.size() == 100);
  CHECK(m.trees[0].nodes[0].feature == 0);
  CHECK(m.trees[0].nodes[0].threshold == 0.0);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double p = gbt_predict_proba(m, t.rows[i]);
    CHECK((p > 0.5) == (t.labels[i] == 1));
  }
  CHECK(gbt_predict_proba(m, std::vector<float>{0.25f}) > 0.5);
  CHECK(gbt_predict_proba(m, std::vector<float>{-0.25f}) < 0.5);
}

TEST_CASE("constant models") {
  GbtModel m;
  m.n_features = 3;
  CHECK(gbt_predict_proba(m, std::vector<float>{1, 2, 3}) == 0.5);
  Tree leaf;
  leaf.nodes.push_back({});
  leaf.nodes[0].value = 0.7;
  m.trees.push_back(leaf);
  m.params.learning_rate = 1.0;
  CHECK(gbt_predict_proba(m, std::vector<float>{1, 2, 3}) == doctest::Approx(sigmoid(0.7)));
  m.trees[0].nodes[0].value = 0.0;
  CHECK(gbt_predict_proba(m, std::vector<float>{0, 0, 0}) == 0.5);
  CHECK(model_code([&] { gbt_predict_proba(m, std::vector<float>{1}); }) ==
        ModelErrc::DimensionMismatch);
}

TEST_CASE("probabilities stay strictly inside (0,1)") {
  GbtModel m;
  m.n_features = 1;
  m.params.learning_rate = 1.0;
  Tree leaf;
  leaf.nodes.push_back({});
  leaf.nodes[0].value = 1e4;
  m.trees.push_back(leaf);
  const double hi = gbt_predict_proba(m, std::vector<float>{0});
  CHECK(hi < 1.0);
  m.trees[0].nodes[0].value = -1e4;
  const double lo = gbt_predict_proba(m, std::vector<float>{0});
  CHECK(lo > 0.0);
}

TEST_CASE("training input validation") {
  ToyData t;
  t.rows = {{1}, {2}};
  t.labels = {1, 1};
  CHECK(model_code([&] { gbt_train(t.set(), GbtParams{}, 0); }) == ModelErrc::SingleClassCohort);
  t.labels = {0, 1};
  t.rows[1] = {2, 3};
  CHECK(model_code([&] { gbt_train(t.set(), GbtParams{}, 0); }) == ModelErrc::RaggedMatrix);
  t.rows[1] = {std::numeric_limits<float>::quiet_NaN()};
  CHECK(model_code([&] { gbt_train(t.set(), GbtParams{}, 0); }) == ModelErrc::NonFiniteFeature);
  CHECK(model_code([&] { gbt_train(ToyData{}.set(), GbtParams{}, 0); }) == ModelErrc::EmptyCohort);
  GbtParams bad;
  bad.learning_rate = 0.0;
  t.rows[1] = {2};
  CHECK(model_code([&] { gbt_train(t.set(), bad, 0); }) == ModelErrc::InvalidParams);
}

TEST_CASE("property: trees match the exhaustive boosting oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> n_pick(2, 12), d_pick(1, 4), depth(1, 3),
      trees(1, 4);
  const double lambdas[] = {0.0, 0.5, 1.0, 3.0};
  const double mcws[] = {0.0, 0.1, 0.3, 1.0};
  const double gammas[] = {0.0, 0.0, 0.01};
  int compared_splits = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto data = random_toy(rng, n_pick(rng), d_pick(rng), trial % 2 == 0);
    OracleParams op;
    op.n_trees = trees(rng);
    op.max_depth = depth(rng);
    op.lambda = lambdas[rng() % 4];
    op.min_child_weight = mcws[rng() % 4];
    op.gamma = gammas[rng() % 3];
    op.eta = trial % 3 == 0 ? 1.0 : 0.3;

    GbtParams gp;
    gp.n_trees = op.n_trees;
    gp.max_depth = op.max_depth;
    gp.l2_lambda = op.lambda;
    gp.min_child_weight = op.min_child_weight;
    gp.gamma = op.gamma;
    gp.learning_rate = op.eta;

    const auto model = gbt_train(data.set(), gp, 0);
    const auto oracle = BoostOracle(data.rows, data.labels, op).fit();
    REQUIRE(model.trees.size() == oracle.size());
    for (std::size_t t = 0; t < oracle.size(); ++t) {
      std::string why;
      INFO("trial " << trial << " tree " << t);
      CHECK_MESSAGE(same_tree(model.trees[t], 0, *oracle[t], why), why);
      if (oracle[t]->feature >= 0) ++compared_splits;
    }

    // The root gain of the first round, straight from the split kernel.
    if (oracle[0]->feature >= 0) {
      const auto set = data.set();
      const auto cols = SortedColumns::build(set);
      std::vector<std::int64_t> g, h;
      GradientSums tot;
      for (int y : data.labels) {
        g.push_back(to_fixed(0.5 - y));
        h.push_back(to_fixed(0.25));
        tot.grad += g.back();
        tot.hess += h.back();
      }
      std::vector<std::int32_t> slot(data.labels.size(), 0);
      std::vector<GradientSums> totals = {tot};
      SplitQuery q{g, h, slot, totals, op.lambda, op.gamma, op.min_child_weight};
      const auto best = find_best_splits_serial(cols, q);
      CHECK(best[0].feature == oracle[0]->feature);
      CHECK(gains_tie(best[0].gain, oracle[0]->gain));
    }
  }
  CHECK(compared_splits > 500);
}

TEST_CASE("property: logistic derivatives match finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> m(-8.0, 8.0);
  for (int i = 0; i < 10'000; ++i) {
    const double margin = m(rng);
    const int y = static_cast<int>(rng() % 2);
    const auto d = logistic_derivatives(margin, y);
    const auto fd = logistic_finite_diff(margin, y);
    CHECK(std::abs(d.grad - fd.grad) <= 1e-6 * std::abs(d.grad));
    CHECK(std::abs(d.hess - fd.hess) <= 1e-6 * std::abs(d.hess));
    CHECK(logistic_loss(margin, y) ==
          doctest::Approx(static_cast<double>(reference_logistic_loss(margin, y)))
              .epsilon(1e-12));
  }
  CHECK(logistic_loss(800.0, 1) == doctest::Approx(0.0));
  CHECK(logistic_loss(800.0, 0) == doctest::Approx(800.0));
}

TEST_CASE("property: training log-loss never increases") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto data = random_toy(rng, 10 + trial % 40, 1 + trial % 6, trial % 2 == 1);
    GbtParams p;
    p.n_trees = 30;
    p.min_child_weight = trial % 3 == 0 ? 0.0 : 1.0;
    GbtTrainStats stats;
    gbt_train(data.set(), p, 0, &stats);
    REQUIRE(stats.train_logloss.size() == 31);
    CHECK(stats.train_logloss[0] == doctest::Approx(std::log(2.0)));
    for (std::size_t r = 1; r < stats.train_logloss.size(); ++r) {
      CHECK(stats.train_logloss[r] <= stats.train_logloss[r - 1] + 1e-15);
    }
  }
}

TEST_CASE("property: strictly increasing feature transforms leave predictions unchanged") {
  std::mt19937_64 rng(9);
  auto transform = [](float v, std::size_t f) -> float {
    const double x = v;
    switch (f % 3) {
      case 0: return static_cast<float>(3 * x * x * x + x);
      case 1: return static_cast<float>(std::sinh(x) * 5);
      default: return static_cast<float>(2 * x - 7);
    }
  };
  for (int trial = 0; trial < 40; ++trial) {
    const auto data = random_toy(rng, 30, 5, trial % 2 == 0);
    auto moved = data;
    for (auto& r : moved.rows) {
      for (std::size_t f = 0; f < r.size(); ++f) r[f] = transform(r[f], f);
    }
    GbtParams p;
    p.n_trees = 20;
    const auto a = gbt_train(data.set(), p, 1);
    const auto b = gbt_train(moved.set(), p, 1);
    INFO("trial " << trial);
    // Only training rows: an unseen value can sit between two values of a
    // node's rows, where the midpoint moves under the transform.
    for (std::size_t k = 0; k < data.rows.size(); ++k) {
      CHECK(gbt_predict_proba(a, data.rows[k]) == gbt_predict_proba(b, moved.rows[k]));
    }
  }
}

TEST_CASE("models do not depend on the thread count") {
  std::mt19937_64 rng(10);
  const auto fine = random_toy(rng, 60, 700, false);
  const auto coarse = random_toy(rng, 60, 700, true);
  GbtParams p;
  p.n_trees = 15;
  for (const auto* data : {&fine, &coarse}) {
    parallel::set_threads(1);
    const auto one = serialize_model(gbt_train(data->set(), p, 3));
    parallel::set_threads(4);
    const auto four = serialize_model(gbt_train(data->set(), p, 3));
    parallel::set_threads(0);
    CHECK(one == four);
  }
}
