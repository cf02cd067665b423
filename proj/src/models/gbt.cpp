#include <algorithm>
#include <cmath>

#include "flowcll/models/error.hpp"
#include "flowcll/models/gbt.hpp"
#include "flowcll/models/split_search.hpp"

namespace flowcll::models {

void GbtParams::validate() const {
  auto bad = [](const std::string& what) { throw ModelError(ModelErrc::InvalidParams, what); };
  if (n_trees < 1) bad("n_trees must be >= 1");
  if (max_depth < 1) bad("max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) bad("learning_rate must lie in (0,1]");
  if (!(l2_lambda >= 0.0)) bad("l2_lambda must be >= 0");
  if (!(gamma >= 0.0)) bad("gamma must be >= 0");
  if (!(min_child_weight >= 0.0)) bad("min_child_weight must be >= 0");
  if (!(base_score > 0.0 && base_score < 1.0)) bad("base_score must lie in (0,1)");
}

double GbtModel::base_margin() const {
  return std::log(params.base_score / (1.0 - params.base_score));
}

double GbtModel::predict_margin(std::span<const float> x) const {
  double m = base_margin();
  for (const auto& t : trees) m += params.learning_rate * t.predict(x);
  return m;
}

double sigmoid(double margin) { return 1.0 / (1.0 + std::exp(-margin)); }

LogisticDerivatives logistic_derivatives(double margin, int label) {
  const double p = sigmoid(margin);
  return {p - static_cast<double>(label), p * (1.0 - p)};
}

double logistic_loss(double margin, int label) {
  // softplus(m) = max(m, 0) + log1p(exp(-|m|))
  const double softplus = std::max(margin, 0.0) + std::log1p(std::exp(-std::abs(margin)));
  return softplus - static_cast<double>(label) * margin;
}

namespace {

double mean_logloss(std::span<const double> margin, std::span<const int> labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < margin.size(); ++i) s += logistic_loss(margin[i], labels[i]);
  return s / static_cast<double>(margin.size());
}

struct TreeGrower {
  const TrainingSet& set;
  const SortedColumns& columns;
  const GbtParams& params;

  std::vector<double> grad, hess;
  std::vector<std::int64_t> grad_q, hess_q;
  std::vector<std::int32_t> node_of_row;

  Tree grow() {
    const std::size_t n = set.size();
    Tree tree;
    tree.nodes.emplace_back();
    node_of_row.assign(n, 0);

    std::vector<std::int32_t> level = {0};
    std::vector<std::int32_t> row_slot(n);
    for (std::size_t depth = 0; depth < params.max_depth && !level.empty(); ++depth) {
      // Open slots: nodes of this level heavy enough for two children.
      std::vector<GradientSums> totals(level.size());
      std::vector<std::int32_t> slot_of_node(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < level.size(); ++s) {
        slot_of_node[static_cast<std::size_t>(level[s])] = static_cast<std::int32_t>(s);
      }
      for (std::size_t r = 0; r < n; ++r) {
        const auto s = slot_of_node[static_cast<std::size_t>(node_of_row[r])];
        row_slot[r] = s;
        if (s >= 0) {
          totals[static_cast<std::size_t>(s)].grad += grad_q[r];
          totals[static_cast<std::size_t>(s)].hess += hess_q[r];
        }
      }

      SplitQuery q{grad_q, hess_q, row_slot, totals, params.l2_lambda, params.gamma,
                   params.min_child_weight};
      const auto best = find_best_splits(columns, q);

      std::vector<std::int32_t> next;
      for (std::size_t s = 0; s < level.size(); ++s) {
        const auto& b = best[s];
        if (!b.found() || !(b.gain > kMinSplitGain)) continue;
        const auto id = static_cast<std::size_t>(level[s]);
        const auto left = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[id];
        node.feature = b.feature;
        node.threshold = b.threshold;
        node.left = left;
        node.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (std::size_t r = 0; r < n; ++r) {
        const auto& node = tree.nodes[static_cast<std::size_t>(node_of_row[r])];
        if (node.is_leaf()) continue;
        const double v = set.rows[r][static_cast<std::size_t>(node.feature)];
        node_of_row[r] = v < node.threshold ? node.left : node.right;
      }
      level = std::move(next);
    }

    // Leaf weights from plain row-order sums.
    std::vector<double> g_sum(tree.nodes.size(), 0.0), h_sum(tree.nodes.size(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      g_sum[static_cast<std::size_t>(node_of_row[r])] += grad[r];
      h_sum[static_cast<std::size_t>(node_of_row[r])] += hess[r];
    }
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      auto& node = tree.nodes[i];
      if (!node.is_leaf()) continue;
      const double denom = h_sum[i] + params.l2_lambda;
      node.value = denom > 0.0 ? -g_sum[i] / denom : 0.0;
    }
    return tree;
  }
};

} // namespace

GbtModel gbt_train(const TrainingSet& train, const GbtParams& params,
                   std::uint64_t seed, GbtTrainStats* stats) {
  params.validate();
  train.validate();

  GbtModel model;
  model.params = params;
  model.n_features = train.n_features;
  model.seed = seed;

  const auto columns = SortedColumns::build(train);
  const std::size_t n = train.size();
  std::vector<double> margin(n, model.base_margin());
  if (stats) {
    stats->train_logloss.clear();
    stats->train_logloss.push_back(mean_logloss(margin, train.labels));
  }

  TreeGrower grower{train, columns, params, {}, {}, {}, {}, {}};
  grower.grad.resize(n);
  grower.hess.resize(n);
  grower.grad_q.resize(n);
  grower.hess_q.resize(n);

  model.trees.reserve(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = logistic_derivatives(margin[i], train.labels[i]);
      grower.grad[i] = d.grad;
      grower.hess[i] = d.hess;
      grower.grad_q[i] = to_fixed(d.grad);
      grower.hess_q[i] = to_fixed(d.hess);
    }
    model.trees.push_back(grower.grow());
    const auto& tree = model.trees.back();
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] += params.learning_rate * tree.predict(train.rows[i]);
    }
    if (stats) stats->train_logloss.push_back(mean_logloss(margin, train.labels));
  }
  return model;
}

double gbt_predict_proba(const GbtModel& model, std::span<const float> x) {
  if (x.size() != model.n_features) {
    throw ModelError(ModelErrc::DimensionMismatch,
                     "model expects " + std::to_string(model.n_features) + " features, got " +
                         std::to_string(x.size()));
  }
  // Clamped so the result stays inside (0, 1) for extreme margins.
  constexpr double kEps = 1e-16;
  return std::clamp(sigmoid(model.predict_margin(x)), kEps, 1.0 - kEps);
}

} // namespace flowcll::models
