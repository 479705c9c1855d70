#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "nhss/core/dense.hpp"
#include "nhss/core/rng.hpp"
#include "nhss/hss/cluster_tree.hpp"

namespace nhss {

/// One level of the telescopic decomposition: `nodes` diagonal blocks D_i
/// (block x block) and generators U_i, V_i (block x rank).
struct HssLevel {
  std::size_t block = 0;
  std::vector<DenseMatrix> D, U, V;

  std::size_t nodes() const { return D.size(); }
  std::size_t size() const { return nodes() * block; }
};

/// HSS(r, T) operator stored as its telescopic decomposition.
///
/// levels[0] holds the leaves of the original tree (2^L nodes of size
/// d / 2^L). Each further level k >= 1 belongs to the reduced balanced tree
/// over 2^(L-k+1) r indices, whose nodes all have size 2r. `root` is the
/// depth-zero remainder: 2r x 2r when L >= 1, the full d x d block when L = 0.
/// The dense operator is A = D + U A' V^T unrolled level by level.
class HssMatrix {
 public:
  HssMatrix() = default;

  /// Zero operator with the shapes dictated by (tree, rank).
  HssMatrix(const ClusterTree& tree, std::size_t rank) : tree_(tree), rank_(rank) {
    if (rank == 0) throw ConfigError("hss: rank must be >= 1");
    const std::size_t L = tree.depth();
    if (L > 0 && tree.leaf_size() < rank)
      throw ConfigError("hss: leaf size d/2^L=" + std::to_string(tree.leaf_size()) + " is smaller than rank r=" +
                        std::to_string(rank));
    levels_.resize(L);
    for (std::size_t k = 0; k < L; ++k) {
      HssLevel& lv = levels_[k];
      lv.block = k == 0 ? tree.leaf_size() : 2 * rank;
      const std::size_t n = std::size_t{1} << (L - k);
      lv.D.assign(n, DenseMatrix::Zero(lv.block, lv.block));
      lv.U.assign(n, DenseMatrix::Zero(lv.block, rank));
      lv.V.assign(n, DenseMatrix::Zero(lv.block, rank));
    }
    const std::size_t root = L == 0 ? tree.size() : 2 * rank;
    root_ = DenseMatrix::Zero(root, root);
  }

  const ClusterTree& tree() const { return tree_; }
  std::size_t size() const { return tree_.size(); }
  std::size_t rank() const { return rank_; }
  std::size_t depth() const { return tree_.depth(); }

  std::vector<HssLevel>& levels() { return levels_; }
  const std::vector<HssLevel>& levels() const { return levels_; }
  DenseMatrix& root() { return root_; }
  const DenseMatrix& root() const { return root_; }

  /// Input length of level k (k == depth() addresses the root).
  std::size_t level_input_size(std::size_t k) const { return k < levels_.size() ? levels_[k].size() : root_.rows(); }

  /// Visits every parameter block in declaration order:
  /// level by level, node by node, D then U then V; root last.
  template <class F>
  void for_each_block(F&& f) {
    for (auto& lv : levels_)
      for (std::size_t i = 0; i < lv.nodes(); ++i) {
        f(lv.D[i]);
        f(lv.U[i]);
        f(lv.V[i]);
      }
    f(root_);
  }
  template <class F>
  void for_each_block(F&& f) const {
    for (const auto& lv : levels_)
      for (std::size_t i = 0; i < lv.nodes(); ++i) {
        f(lv.D[i]);
        f(lv.U[i]);
        f(lv.V[i]);
      }
    f(root_);
  }

  void set_zero() {
    for_each_block([](DenseMatrix& m) { m.setZero(); });
  }

  /// Bitwise comparison of structure and every block.
  bool operator==(const HssMatrix& o) const {
    if (!(tree_ == o.tree_) || rank_ != o.rank_) return false;
    std::vector<const DenseMatrix*> a, b;
    for_each_block([&](const DenseMatrix& m) { a.push_back(&m); });
    o.for_each_block([&](const DenseMatrix& m) { b.push_back(&m); });
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols() ||
          std::memcmp(a[i]->data(), b[i]->data(), sizeof(double) * static_cast<std::size_t>(a[i]->size())) != 0)
        return false;
    return true;
  }

 private:
  ClusterTree tree_;
  std::size_t rank_ = 1;
  std::vector<HssLevel> levels_;
  DenseMatrix root_;
};

/// Exact number of stored scalars across all D, U, V blocks and the root.
inline std::size_t hss_param_count(const HssMatrix& h) {
  std::size_t n = 0;
  h.for_each_block([&](const DenseMatrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

/// Fills every block i.i.d. uniform on [-s, s], s = scale / sqrt(block cols).
inline HssMatrix hss_random(const ClusterTree& tree, std::size_t rank, std::uint64_t seed, double scale = 1.0) {
  HssMatrix h(tree, rank);
  Rng rng(seed);
  h.for_each_block([&](DenseMatrix& m) {
    const double s = scale / std::sqrt(static_cast<double>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-s, s);
  });
  return h;
}

/// Expected squared Frobenius norm of hss_to_dense(hss_random(tree, rank, seed, scale)).
inline double hss_random_expected_frobenius_sq(const ClusterTree& tree, std::size_t rank, double scale) {
  const HssMatrix shape(tree, rank);
  const double v = scale * scale / 3.0;  // variance times fan for every block
  const double r = static_cast<double>(rank);
  double f = static_cast<double>(shape.root().rows()) * v;
  for (std::size_t k = shape.levels().size(); k-- > 0;) {
    const auto& lv = shape.levels()[k];
    const double m = static_cast<double>(lv.block);
    const double g = m * v / r;
    f = static_cast<double>(lv.nodes()) * m * v + g * g * f;
  }
  return f;
}

/// Scale at which a random HSS matrix has the same expected squared
/// Frobenius norm (d/3) as a dense d x d matrix drawn by the same rule at
/// scale 1.
inline double hss_gain_matched_scale(const ClusterTree& tree, std::size_t rank) {
  const double target = static_cast<double>(tree.size()) / 3.0;
  double lo = 0.0, hi = 1.0;
  while (hss_random_expected_frobenius_sq(tree, rank, hi) < target) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (hss_random_expected_frobenius_sq(tree, rank, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Unrolls the telescopic recursion into a dense d x d matrix.
inline DenseMatrix hss_to_dense(const HssMatrix& h) {
  DenseMatrix a = h.root();
  const auto& levels = h.levels();
  for (std::size_t k = levels.size(); k-- > 0;) {
    const HssLevel& lv = levels[k];
    const std::size_t r = h.rank();
    DenseMatrix next = DenseMatrix::Zero(lv.size(), lv.size());
    for (std::size_t i = 0; i < lv.nodes(); ++i) {
      for (std::size_t j = 0; j < lv.nodes(); ++j) {
        auto blk = next.block(i * lv.block, j * lv.block, lv.block, lv.block);
        blk.noalias() = lv.U[i] * a.block(i * r, j * r, r, r) * lv.V[j].transpose();
        if (i == j) blk += lv.D[i];
      }
    }
    a = std::move(next);
  }
  return a;
}

}  // namespace nhss
