#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace flowcll::models {

/// Internal nodes route left iff x[feature] < threshold. Leaves carry a
/// log-odds contribution (boosting) or a class-1 fraction (forest).
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

/// Flat binary tree; nodes[0] is the root and children always follow their
/// parent.
struct Tree {
  std::vector<TreeNode> nodes;

  std::size_t leaf_index(std::span<const float> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<double>(x[static_cast<std::size_t>(n.feature)]) < n.threshold
              ? static_cast<std::size_t>(n.left)
              : static_cast<std::size_t>(n.right);
    }
    return i;
  }

  double predict(std::span<const float> x) const { return nodes[leaf_index(x)].value; }

  /// Depth of the deepest leaf; a single leaf has depth 0.
  std::size_t depth() const;
};

/// Midpoint between adjacent distinct feature values.
inline double split_threshold(float lo, float hi) {
  return 0.5 * (static_cast<double>(lo) + static_cast<double>(hi));
}

} // namespace flowcll::models
