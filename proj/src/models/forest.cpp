#include <algorithm>
#include <cmath>
#include <random>

#include "flowcll/models/error.hpp"
#include "flowcll/models/forest.hpp"
#include "flowcll/seed.hpp"

namespace flowcll::models {

void ForestParams::validate() const {
  if (n_trees < 1) throw ModelError(ModelErrc::InvalidParams, "n_trees must be >= 1");
  if (max_depth < 1) throw ModelError(ModelErrc::InvalidParams, "max_depth must be >= 1");
}

std::size_t ForestParams::features_per_node(std::size_t n_features) const {
  std::size_t k = max_features;
  if (k == 0) {
    k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features))));
  }
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n_features, 1));
}

double gini_impurity(double negatives, double positives) {
  const double total = negatives + positives;
  if (!(total > 0.0)) throw ModelError(ModelErrc::EmptyNode, "gini of an empty node");
  const double p0 = negatives / total;
  const double p1 = positives / total;
  return 1.0 - (p0 * p0 + p1 * p1);
}

namespace {

struct Sample {
  std::uint32_t row;
  std::uint32_t weight;
};

struct ForestGrower {
  const TrainingSet& set;
  const ForestParams& params;
  std::size_t k_features;
  std::mt19937_64 rng;
  Tree tree;

  // Floyd's algorithm: k distinct indices from [0, d), returned sorted.
  std::vector<std::size_t> sample_features() {
    const std::size_t d = set.n_features;
    std::vector<std::size_t> chosen;
    chosen.reserve(k_features);
    for (std::size_t j = d - k_features; j < d; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, j);
      const std::size_t t = pick(rng);
      if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
        chosen.push_back(t);
      } else {
        chosen.push_back(j);
      }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  std::int32_t grow(std::vector<Sample> samples, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();

    double w0 = 0.0, w1 = 0.0;
    for (const auto& s : samples) (set.labels[s.row] ? w1 : w0) += s.weight;
    const double total = w0 + w1;
    tree.nodes[static_cast<std::size_t>(id)].value = w1 / total;
    if (depth >= params.max_depth || w0 == 0.0 || w1 == 0.0) return id;

    const double parent = gini_impurity(w0, w1);
    double best_impurity = parent;
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<float, std::uint32_t>> col(samples.size());
    for (const auto f : sample_features()) {
      for (std::size_t i = 0; i < samples.size(); ++i) {
        col[i] = {set.rows[samples[i].row][f], static_cast<std::uint32_t>(i)};
      }
      std::sort(col.begin(), col.end());
      double l0 = 0.0, l1 = 0.0;
      for (std::size_t i = 0; i + 1 < col.size(); ++i) {
        const auto& s = samples[col[i].second];
        (set.labels[s.row] ? l1 : l0) += s.weight;
        if (col[i].first == col[i + 1].first) continue;
        const double nl = l0 + l1;
        const double nr = total - nl;
        const double impurity =
            (nl * gini_impurity(l0, l1) + nr * gini_impurity(w0 - l0, w1 - l1)) / total;
        // Strict improvement keeps the lowest feature, then lowest threshold.
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = static_cast<std::int32_t>(f);
          best_threshold = split_threshold(col[i].first, col[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<Sample> left, right;
    for (const auto& s : samples) {
      const double v = set.rows[s.row][static_cast<std::size_t>(best_feature)];
      (v < best_threshold ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const auto l = grow(std::move(left), depth + 1);
    const auto r = grow(std::move(right), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

} // namespace

ForestModel rf_train(const TrainingSet& train, const ForestParams& params,
                     std::uint64_t seed) {
  params.validate();
  train.validate();

  ForestModel model;
  model.params = params;
  model.n_features = train.n_features;
  model.seed = seed;
  model.trees.resize(params.n_trees);

  const std::size_t n = train.size();
  const std::size_t k = params.features_per_node(train.n_features);
  const auto n_trees = static_cast<std::ptrdiff_t>(params.n_trees);

  // Every tree owns an RNG stream derived from (seed, tree index), so the
  // forest does not depend on scheduling.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t t = 0; t < n_trees; ++t) {
    ForestGrower g{train, params, k,
                   std::mt19937_64(stream_seed(seed, static_cast<std::uint64_t>(t))), {}};
    std::vector<std::uint32_t> counts(n, params.bootstrap ? 0u : 1u);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      for (std::size_t i = 0; i < n; ++i) ++counts[draw(g.rng)];
    }
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < n; ++i) {
      if (counts[i]) samples.push_back({static_cast<std::uint32_t>(i), counts[i]});
    }
    g.grow(std::move(samples), 0);
    model.trees[static_cast<std::size_t>(t)] = std::move(g.tree);
  }
  return model;
}

double rf_predict_proba(const ForestModel& model, std::span<const float> x) {
  if (x.size() != model.n_features) {
    throw ModelError(ModelErrc::DimensionMismatch,
                     "model expects " + std::to_string(model.n_features) + " features, got " +
                         std::to_string(x.size()));
  }
  if (model.trees.empty()) return 0.5;
  double s = 0.0;
  for (const auto& t : model.trees) s += t.predict(x);
  return s / static_cast<double>(model.trees.size());
}

} // namespace flowcll::models
