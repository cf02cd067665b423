#pragma once

// Second-order gradient boosting with logistic loss.
//
// Each round computes g_i = p_i - y_i and h_i = p_i (1 - p_i), grows a tree
// level by level with the regularized gain
//   1/2 [GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)] - gamma
// and assigns leaf weights w = -G/(H+lambda). Stored leaf values are the
// unscaled weights; prediction is
//   sigmoid(logit(base_score) + learning_rate * sum_t w_t(x)).

#include <cstdint>
#include <span>
#include <vector>

#include "flowcll/models/training_set.hpp"
#include "flowcll/models/tree.hpp"

namespace flowcll::models {

struct GbtParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 3;
  double learning_rate = 0.3;
  double l2_lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  double base_score = 0.5;

  void validate() const;
};

struct GbtModel {
  GbtParams params;
  std::vector<Tree> trees;
  std::size_t n_features = 0;
  std::uint64_t seed = 0;

  double base_margin() const;
  double predict_margin(std::span<const float> x) const;
};

struct GbtTrainStats {
  /// Mean training log-loss after each round; entry 0 is the base score.
  std::vector<double> train_logloss;
};

double sigmoid(double margin);

struct LogisticDerivatives {
  double grad;
  double hess;
};

/// Derivatives of logistic_loss with respect to the margin.
LogisticDerivatives logistic_derivatives(double margin, int label);

/// log(1 + e^m) - y m, evaluated without overflow.
double logistic_loss(double margin, int label);

GbtModel gbt_train(const TrainingSet& train, const GbtParams& params,
                   std::uint64_t seed, GbtTrainStats* stats = nullptr);

/// Throws DimensionMismatch when x has the wrong length.
double gbt_predict_proba(const GbtModel& model, std::span<const float> x);

} // namespace flowcll::models
