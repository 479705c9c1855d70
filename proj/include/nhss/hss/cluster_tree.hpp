#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nhss/core/error.hpp"

namespace nhss {

/// Half-open index interval [lo, hi).
struct Interval {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::size_t size() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// Balanced binary cluster tree over [0, d). Every non-leaf node splits at
/// its midpoint, so the tree is fully described by (d, depth) and node
/// (level, i) covers [i * d / 2^level, (i + 1) * d / 2^level).
class ClusterTree {
 public:
  ClusterTree() = default;

  ClusterTree(std::size_t d, std::size_t depth) : d_(d), depth_(depth) {
    if (d == 0) throw ConfigError("cluster tree: index count d must be positive");
    if (depth >= 8 * sizeof(std::size_t) - 1 || d % (std::size_t{1} << depth) != 0)
      throw ConfigError("cluster tree: d=" + std::to_string(d) + " is not divisible by 2^L with L=" +
                        std::to_string(depth));
  }

  std::size_t size() const { return d_; }
  std::size_t depth() const { return depth_; }
  std::size_t leaf_count() const { return std::size_t{1} << depth_; }
  std::size_t leaf_size() const { return d_ >> depth_; }
  std::size_t node_count(std::size_t level) const { return std::size_t{1} << level; }

  Interval node(std::size_t level, std::size_t i) const {
    const std::size_t w = d_ >> level;
    return {i * w, (i + 1) * w};
  }

  std::vector<Interval> level_nodes(std::size_t level) const {
    std::vector<Interval> out;
    out.reserve(node_count(level));
    for (std::size_t i = 0; i < node_count(level); ++i) out.push_back(node(level, i));
    return out;
  }

  std::vector<Interval> leaves() const { return level_nodes(depth_); }

  /// Children of node (level, i) live at level + 1 with indices 2i, 2i + 1.
  std::pair<Interval, Interval> children(std::size_t level, std::size_t i) const {
    return {node(level + 1, 2 * i), node(level + 1, 2 * i + 1)};
  }

  bool operator==(const ClusterTree&) const = default;

 private:
  std::size_t d_ = 1;
  std::size_t depth_ = 0;
};

inline ClusterTree build_balanced_tree(std::size_t d, std::size_t depth) { return ClusterTree(d, depth); }

}  // namespace nhss
