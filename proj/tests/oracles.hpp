#pragma once

// Reference implementations used to check the library. They are written for
// clarity, not speed, and share no code with the code under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flowcll/models/tree.hpp"

namespace testsupport {

// ---- boosting -------------------------------------------------------------

struct OracleParams {
  std::size_t n_trees = 1;
  std::size_t max_depth = 3;
  double eta = 0.3;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  double base_score = 0.5;
};

struct OracleNode {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  double value = 0.0;
  std::unique_ptr<OracleNode> left, right;
};

inline bool gains_tie(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

class BoostOracle {
 public:
  BoostOracle(const std::vector<std::vector<float>>& x, const std::vector<int>& y,
              OracleParams p)
      : x_(x), y_(y), p_(p) {}

  std::vector<std::unique_ptr<OracleNode>> fit() {
    const std::size_t n = x_.size();
    std::vector<double> margin(n, std::log(p_.base_score / (1.0 - p_.base_score)));
    std::vector<std::unique_ptr<OracleNode>> trees;
    for (std::size_t t = 0; t < p_.n_trees; ++t) {
      g_.assign(n, 0.0);
      h_.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double prob = 1.0 / (1.0 + std::exp(-margin[i]));
        g_[i] = prob - y_[i];
        h_[i] = prob * (1.0 - prob);
      }
      std::vector<std::size_t> all(n);
      for (std::size_t i = 0; i < n; ++i) all[i] = i;
      trees.push_back(build(all, 0));
      for (std::size_t i = 0; i < n; ++i) margin[i] += p_.eta * predict(*trees.back(), x_[i]);
    }
    return trees;
  }

  static double predict(const OracleNode& node, const std::vector<float>& row) {
    const OracleNode* n = &node;
    while (n->feature >= 0) {
      n = static_cast<double>(row[static_cast<std::size_t>(n->feature)]) < n->threshold
              ? n->left.get()
              : n->right.get();
    }
    return n->value;
  }

 private:
  std::unique_ptr<OracleNode> build(const std::vector<std::size_t>& rows, std::size_t depth) {
    auto node = std::make_unique<OracleNode>();
    double G = 0, H = 0;
    for (auto r : rows) {
      G += g_[r];
      H += h_[r];
    }
    node->value = -G / (H + p_.lambda);
    if (depth >= p_.max_depth) return node;

    bool have = false;
    double best_gain = 0;
    int best_f = -1;
    double best_t = 0;
    const std::size_t d = x_.front().size();
    for (std::size_t f = 0; f < d; ++f) {
      std::vector<float> vals;
      for (auto r : rows) vals.push_back(x_[r][f]);
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
        const double thr = 0.5 * (static_cast<double>(vals[k]) + static_cast<double>(vals[k + 1]));
        // Both children summed directly; H - HL can round across the
        // min_child_weight boundary.
        double GL = 0, HL = 0, GR = 0, HR = 0;
        for (auto r : rows) {
          if (static_cast<double>(x_[r][f]) < thr) {
            GL += g_[r];
            HL += h_[r];
          } else {
            GR += g_[r];
            HR += h_[r];
          }
        }
        if (HL < p_.min_child_weight || HR < p_.min_child_weight) continue;
        const double gain = 0.5 * (GL * GL / (HL + p_.lambda) + GR * GR / (HR + p_.lambda) -
                                   G * G / (H + p_.lambda)) -
                            p_.gamma;
        // Enumeration runs in (feature, threshold) order, so on a tie the
        // earlier candidate stays.
        if (!have || (gain > best_gain && !gains_tie(gain, best_gain))) {
          have = true;
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_t = thr;
        }
      }
    }
    if (!have || !(best_gain > 1e-10)) return node;

    node->feature = best_f;
    node->threshold = best_t;
    node->gain = best_gain;
    std::vector<std::size_t> l, r;
    for (auto row : rows) {
      (static_cast<double>(x_[row][static_cast<std::size_t>(best_f)]) < best_t ? l : r)
          .push_back(row);
    }
    node->left = build(l, depth + 1);
    node->right = build(r, depth + 1);
    return node;
  }

  const std::vector<std::vector<float>>& x_;
  const std::vector<int>& y_;
  OracleParams p_;
  std::vector<double> g_, h_;
};

/// Structural comparison; leaves to 1e-10 relative. On mismatch `why`
/// describes the first difference.
inline bool same_tree(const flowcll::models::Tree& tree, std::size_t idx, const OracleNode& o,
                      std::string& why) {
  const auto& n = tree.nodes[idx];
  if (n.is_leaf() != (o.feature < 0)) {
    std::ostringstream s;
    s << "node " << idx << ": leaf mismatch (library feature " << n.feature << ", oracle "
      << o.feature << " thr " << o.threshold << " gain " << o.gain << ")";
    why = s.str();
    return false;
  }
  if (n.is_leaf()) {
    const double tol = 1e-10 * std::max(1.0, std::abs(o.value));
    if (std::abs(n.value - o.value) > tol) {
      std::ostringstream s;
      s.precision(17);
      s << "leaf " << idx << ": " << n.value << " vs " << o.value;
      why = s.str();
      return false;
    }
    return true;
  }
  if (n.feature != o.feature || n.threshold != o.threshold) {
    std::ostringstream s;
    s.precision(17);
    s << "node " << idx << ": split (" << n.feature << ", " << n.threshold << ") vs ("
      << o.feature << ", " << o.threshold << ")";
    why = s.str();
    return false;
  }
  return same_tree(tree, static_cast<std::size_t>(n.left), *o.left, why) &&
         same_tree(tree, static_cast<std::size_t>(n.right), *o.right, why);
}

// ---- AUC ------------------------------------------------------------------

/// Mann-Whitney form: fraction of (positive, negative) pairs ranked
/// correctly, ties counted half. Exact in integers as 2U / (2 P N).
inline double auc_u_statistic(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::uint64_t twice_u = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg) += 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) twice_u += 2;
      else if (scores[i] == scores[j]) twice_u += 1;
    }
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

// ---- finite differences ---------------------------------------------------

inline long double reference_logistic_loss(long double m, int y) {
  const long double sp = std::max(m, 0.0L) + std::log1p(std::exp(-std::abs(m)));
  return sp - static_cast<long double>(y) * m;
}

struct FiniteDiff {
  double grad;
  double hess;
};

/// Central differences with one Richardson step (steps 1e-3 for the first
/// derivative, 1e-2 for the second).
inline FiniteDiff logistic_finite_diff(double m, int y) {
  auto L = [&](long double v) { return reference_logistic_loss(v, y); };
  auto d1 = [&](long double d) { return (L(m + d) - L(m - d)) / (2 * d); };
  auto d2 = [&](long double d) { return (L(m + d) - 2 * L(m) + L(m - d)) / (d * d); };
  const long double dg = 1e-3L, dh = 1e-2L;
  return {static_cast<double>((4 * d1(dg / 2) - d1(dg)) / 3),
          static_cast<double>((4 * d2(dh / 2) - d2(dh)) / 3)};
}

} // namespace testsupport
