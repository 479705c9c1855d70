#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "nhss/core/dense.hpp"
#include "nhss/hss/hss_matrix.hpp"

namespace nhss {

namespace detail {

// Leading `k` left singular vectors, each flipped so that its
// largest-magnitude entry is positive.
inline DenseMatrix leading_left_singular_vectors(const DenseMatrix& m, std::size_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  DenseMatrix u;
  if (m.cols() == 0) {
    u = DenseMatrix::Identity(m.rows(), kk);
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
    const Eigen::MatrixXd& full = svd.matrixU();
    u = DenseMatrix::Zero(m.rows(), kk);
    const Eigen::Index have = std::min<Eigen::Index>(kk, full.cols());
    u.leftCols(have) = full.leftCols(have);
    if (have < kk) {
      // Wide-enough thin U is guaranteed when rows >= k and cols >= k; pad a
      // rank-deficient basis with an orthonormal complement otherwise.
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd(u.leftCols(have)));
      Eigen::MatrixXd q = qr.householderQ();
      u.rightCols(kk - have) = q.middleCols(have, kk - have);
    }
  }
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index arg = 0;
    u.col(j).cwiseAbs().maxCoeff(&arg);
    if (u(arg, j) < 0) u.col(j) *= -1.0;
  }
  return u;
}

}  // namespace detail

/// Compresses a dense matrix into HSS(r, tree) form.
///
/// Per leaf tau: D = A[tau, tau], U = top-r left singular vectors of the block
/// row A[tau, tau^c], V = top-r left singular vectors of A[tau^c, tau]^T. The
/// generators are orthonormal and the coupling A' = U^T (A - D) V is compressed
/// recursively on the reduced balanced tree with leaves of size 2r. Exact (to
/// round-off) whenever A is in HSS(r, tree); lossy otherwise.
inline HssMatrix dense_to_hss(const DenseMatrix& a, const ClusterTree& tree, std::size_t rank) {
  if (a.rows() != a.cols()) throw ShapeError("dense_to_hss: matrix is not square");
  if (static_cast<std::size_t>(a.rows()) != tree.size())
    throw ShapeError("dense_to_hss: matrix size " + std::to_string(a.rows()) + " != tree size " +
                     std::to_string(tree.size()));
  HssMatrix h(tree, rank);
  const std::size_t L = tree.depth();
  const auto r = static_cast<Eigen::Index>(rank);

  DenseMatrix cur = a;
  for (std::size_t k = 0; k < L; ++k) {
    HssLevel& lv = h.levels()[k];
    const auto b = static_cast<Eigen::Index>(lv.block);
    const auto n = static_cast<Eigen::Index>(lv.nodes());
    const Eigen::Index total = n * b;

    DenseMatrix offdiag = cur;
    for (Eigen::Index i = 0; i < n; ++i) {
      lv.D[i] = cur.block(i * b, i * b, b, b);
      offdiag.block(i * b, i * b, b, b).setZero();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      // Block row / column with the diagonal block removed.
      DenseMatrix row(b, total - b), col(b, total - b);
      row << offdiag.block(i * b, 0, b, i * b), offdiag.block(i * b, (i + 1) * b, b, total - (i + 1) * b);
      col << offdiag.block(0, i * b, i * b, b).transpose(),
          offdiag.block((i + 1) * b, i * b, total - (i + 1) * b, b).transpose();
      lv.U[i] = detail::leading_left_singular_vectors(row, rank);
      lv.V[i] = detail::leading_left_singular_vectors(col, rank);
    }
    DenseMatrix next(n * r, n * r);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        next.block(i * r, j * r, r, r).noalias() =
            lv.U[i].transpose() * offdiag.block(i * b, j * b, b, b) * lv.V[j];
    cur = std::move(next);
  }
  h.root() = cur;
  return h;
}

/// Singular values in non-increasing order.
inline Vector singular_values(const DenseMatrix& b) {
  if (b.size() == 0) return Vector();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b);
  return svd.singularValues();
}

/// Smallest k such that the Frobenius norm of sigma_{k+1}, sigma_{k+2}, ...
/// is at most eps.
inline std::size_t epsilon_rank(const DenseMatrix& b, double eps) {
  if (!(eps > 0)) throw ConfigError("epsilon_rank: eps must be positive");
  const Vector s = singular_values(b);
  // tail[k] = sum_{i >= k} s_i^2, accumulated from the smallest value up.
  double tail = 0.0;
  std::size_t k = static_cast<std::size_t>(s.size());
  for (Eigen::Index i = s.size(); i-- > 0;) {
    tail += s[i] * s[i];
    if (std::sqrt(tail) > eps) break;
    k = static_cast<std::size_t>(i);
  }
  return k;
}

}  // namespace nhss
