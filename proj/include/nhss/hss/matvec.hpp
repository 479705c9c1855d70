#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nhss/core/dense.hpp"
#include "nhss/core/parallel.hpp"
#include "nhss/hss/hss_matrix.hpp"

namespace nhss {

using ConstRowsRef = Eigen::Ref<const DenseMatrix>;

/// Intermediates of a batched forward pass, one row per sample.
/// ins[k] is the input of level k (ins[L] feeds the root); inner[k] is the
/// reduced-problem output that level k expands with its U generators.
struct HssTape {
  std::size_t batch = 0;
  std::size_t d = 0, depth = 0, rank = 0;
  std::vector<DenseMatrix> ins;
  std::vector<DenseMatrix> inner;

  bool matches(const HssMatrix& h) const { return d == h.size() && depth == h.depth() && rank == h.rank(); }
};

namespace detail {

struct HssWork {
  std::vector<Vector> ins, outs;

  explicit HssWork(const HssMatrix& h) {
    const std::size_t L = h.depth();
    ins.resize(L + 1);
    outs.resize(L + 1);
    for (std::size_t k = 0; k <= L; ++k) {
      ins[k].resize(h.level_input_size(k));
      outs[k].resize(h.level_input_size(k));
    }
  }
};

// Leaf V-compressions, root product, then U-expansions plus D terms.
inline void forward_sample(const HssMatrix& h, const double* x, double* y, HssWork& w) {
  const auto& levels = h.levels();
  const std::size_t L = levels.size();
  const Eigen::Index r = static_cast<Eigen::Index>(h.rank());
  w.ins[0] = ConstVecMap(x, static_cast<Eigen::Index>(h.size()));
  for (std::size_t k = 0; k < L; ++k) {
    const HssLevel& lv = levels[k];
    const auto b = static_cast<Eigen::Index>(lv.block);
    for (std::size_t i = 0; i < lv.nodes(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      w.ins[k + 1].segment(ii * r, r).noalias() = lv.V[i].transpose() * w.ins[k].segment(ii * b, b);
    }
  }
  w.outs[L].noalias() = h.root() * w.ins[L];
  for (std::size_t k = L; k-- > 0;) {
    const HssLevel& lv = levels[k];
    const auto b = static_cast<Eigen::Index>(lv.block);
    for (std::size_t i = 0; i < lv.nodes(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      auto seg = w.outs[k].segment(ii * b, b);
      seg.noalias() = lv.U[i] * w.outs[k + 1].segment(ii * r, r);
      seg.noalias() += lv.D[i] * w.ins[k].segment(ii * b, b);
    }
  }
  VecMap(y, static_cast<Eigen::Index>(h.size())) = w.outs[0];
}

}  // namespace detail

/// y = A x without forming A. Cost O(d r) for leaf size O(r).
inline Vector hss_matvec(const HssMatrix& h, std::span<const double> x) {
  require(x.size() == h.size(), "hss_matvec: input length " + std::to_string(x.size()) + " != d=" +
                                    std::to_string(h.size()));
  Vector y(static_cast<Eigen::Index>(h.size()));
  detail::HssWork w(h);
  detail::forward_sample(h, x.data(), y.data(), w);
  return y;
}

inline Vector hss_matvec(const HssMatrix& h, const Vector& x) {
  return hss_matvec(h, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Row-wise matvec of a B x d batch (one sample per row). Each row goes
/// through the same kernel as hss_matvec, so results are bitwise identical
/// to the per-sample loop regardless of the thread count.
inline DenseMatrix hss_matvec_batch(const HssMatrix& h, const ConstRowsRef& x, HssTape* tape = nullptr) {
  require(static_cast<std::size_t>(x.cols()) == h.size(),
          "hss_matvec_batch: batch has " + std::to_string(x.cols()) + " columns, expected d=" + std::to_string(h.size()));
  const std::size_t B = static_cast<std::size_t>(x.rows());
  const std::size_t L = h.depth();
  DenseMatrix y(x.rows(), x.cols());
  if (tape) {
    tape->batch = B;
    tape->d = h.size();
    tape->depth = L;
    tape->rank = h.rank();
    tape->ins.resize(L + 1);
    tape->inner.resize(L);
    for (std::size_t k = 0; k <= L; ++k) tape->ins[k].resize(x.rows(), h.level_input_size(k));
    for (std::size_t k = 0; k < L; ++k) tape->inner[k].resize(x.rows(), h.level_input_size(k + 1));
  }
  parallel_chunks(B, [&](std::size_t lo, std::size_t hi) {
    detail::HssWork w(h);
    for (std::size_t b = lo; b < hi; ++b) {
      const auto bb = static_cast<Eigen::Index>(b);
      detail::forward_sample(h, x.row(bb).data(), y.row(bb).data(), w);
      if (tape) {
        for (std::size_t k = 0; k <= L; ++k) tape->ins[k].row(bb) = w.ins[k].transpose();
        for (std::size_t k = 0; k < L; ++k) tape->inner[k].row(bb) = w.outs[k + 1].transpose();
      }
    }
  });
  return y;
}

/// Reverse pass through the recursion. Accumulates generator gradients into
/// `grad` (same structure as the forward operator) and returns dL/dx.
///
/// Per level, with y_i = U_i g_i + D_i x_i and g = inner(V^T x):
///   dD_i += dy_i x_i^T,  dU_i += dy_i g_i^T,  dg_i = U_i^T dy_i,
///   dx_i  = D_i^T dy_i + V_i dz_i,  dV_i += x_i dz_i^T,
/// where dz is the adjoint returned by the inner problem.
inline DenseMatrix hss_vjp_batch(const HssMatrix& h, const HssTape& tape, const ConstRowsRef& dy, HssMatrix& grad) {
  if (!tape.matches(h) || tape.ins.size() != h.depth() + 1)
    throw ShapeError("hss_vjp: tape does not belong to this operator");
  if (static_cast<std::size_t>(dy.rows()) != tape.batch || static_cast<std::size_t>(dy.cols()) != h.size())
    throw ShapeError("hss_vjp: upstream gradient shape mismatch");
  if (!(grad.tree() == h.tree()) || grad.rank() != h.rank()) throw ShapeError("hss_vjp: gradient structure mismatch");

  const auto& levels = h.levels();
  const std::size_t L = levels.size();
  const Eigen::Index r = static_cast<Eigen::Index>(h.rank());

  // Downward sweep: adjoints of level outputs.
  std::vector<DenseMatrix> dout(L + 1), din(L + 1);
  dout[0] = dy;
  for (std::size_t k = 0; k < L; ++k) {
    const HssLevel& lv = levels[k];
    HssLevel& gl = grad.levels()[k];
    const auto b = static_cast<Eigen::Index>(lv.block);
    dout[k + 1].resize(dy.rows(), static_cast<Eigen::Index>(lv.nodes()) * r);
    din[k].resize(dy.rows(), static_cast<Eigen::Index>(lv.size()));
    for (std::size_t i = 0; i < lv.nodes(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto g = dout[k].middleCols(ii * b, b);
      gl.D[i].noalias() += g.transpose() * tape.ins[k].middleCols(ii * b, b);
      gl.U[i].noalias() += g.transpose() * tape.inner[k].middleCols(ii * r, r);
      dout[k + 1].middleCols(ii * r, r).noalias() = g * lv.U[i];
      din[k].middleCols(ii * b, b).noalias() = g * lv.D[i];
    }
  }
  grad.root().noalias() += dout[L].transpose() * tape.ins[L];
  din[L].noalias() = dout[L] * h.root();

  // Upward sweep: adjoints of the V-compressions.
  for (std::size_t k = L; k-- > 0;) {
    const HssLevel& lv = levels[k];
    HssLevel& gl = grad.levels()[k];
    const auto b = static_cast<Eigen::Index>(lv.block);
    for (std::size_t i = 0; i < lv.nodes(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto dz = din[k + 1].middleCols(ii * r, r);
      din[k].middleCols(ii * b, b).noalias() += dz * lv.V[i].transpose();
      gl.V[i].noalias() += tape.ins[k].middleCols(ii * b, b).transpose() * dz;
    }
  }
  return din[0];
}

}  // namespace nhss
