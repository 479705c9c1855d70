#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "nhss/core/dense.hpp"
#include "nhss/core/parallel.hpp"
#include "nhss/core/rng.hpp"
#include "nhss/pdegen/dataset.hpp"

namespace nhss {

using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr int kGeneratorVersion = 1;

// ---------------------------------------------------------------- 1D Poisson

struct Poisson1dOptions {
  std::size_t fine = 1024;
  std::size_t coarse = 256;
  std::size_t modes = 10;
};

/// Discrete -u'' on n points of [0, 1] with homogeneous Dirichlet rows at both
/// ends. Rows 2..n-3 use the five-point fourth-order stencil; rows 1 and n-2
/// fall back to the three-point stencil so the matrix stays pentadiagonal.
inline SparseMatrix poisson1d_operator(std::size_t n) {
  if (n < 5) throw ConfigError("poisson1d: need at least 5 grid points");
  const double h = 1.0 / static_cast<double>(n - 1);
  const double s4 = 1.0 / (12 * h * h), s2 = 1.0 / (h * h);
  std::vector<Eigen::Triplet<double>> t;
  const auto N = static_cast<int>(n);
  t.emplace_back(0, 0, 1.0);
  t.emplace_back(N - 1, N - 1, 1.0);
  for (int i : {1, N - 2}) {
    t.emplace_back(i, i - 1, -s2);
    t.emplace_back(i, i, 2 * s2);
    t.emplace_back(i, i + 1, -s2);
  }
  for (int i = 2; i <= N - 3; ++i) {
    t.emplace_back(i, i - 2, s4);
    t.emplace_back(i, i - 1, -16 * s4);
    t.emplace_back(i, i, 30 * s4);
    t.emplace_back(i, i + 1, -16 * s4);
    t.emplace_back(i, i + 2, s4);
  }
  SparseMatrix a(N, N);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

/// f(x) = sum_k c_k sin(2 k pi x) on n points, zeroed at the first two and last two points.
inline Vector poisson1d_rhs(std::span<const double> c, std::size_t n) {
  Vector f = Vector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n - 1);
    double s = 0;
    for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * std::sin(2.0 * static_cast<double>(k + 1) * std::numbers::pi * x);
    f[static_cast<Eigen::Index>(i)] = s;
  }
  const auto N = static_cast<Eigen::Index>(n);
  f[0] = f[1] = f[N - 2] = f[N - 1] = 0.0;
  return f;
}

class Poisson1dSolver {
 public:
  explicit Poisson1dSolver(std::size_t n) : a_(poisson1d_operator(n)) {
    lu_.analyzePattern(a_);
    lu_.factorize(a_);
    if (lu_.info() != Eigen::Success) throw ComputeError("poisson1d: banded factorization failed");
  }
  const SparseMatrix& matrix() const { return a_; }
  /// Direct solve followed by two steps of iterative refinement.
  Vector solve(const Vector& f) const {
    Vector u = lu_.solve(f);
    for (int it = 0; it < 2; ++it) u += lu_.solve(Vector(f - a_ * u));
    if (lu_.info() != Eigen::Success || !u.allFinite()) throw ComputeError("poisson1d: solve failed");
    u[0] = 0.0;
    u[u.size() - 1] = 0.0;
    return u;
  }

 private:
  SparseMatrix a_;
  // solve() is logically const; Eigen's SparseLU::solve is const as well.
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

/// Right-hand side f (inputs) and solution u (targets), both downsampled.
inline Dataset gen_poisson_1d(std::size_t n, std::uint64_t seed, const Poisson1dOptions& opt = {}) {
  if (n == 0) throw ConfigError("poisson1d: n must be >= 1");
  GridSpec grid = unit_grid({opt.coarse}, {opt.fine});
  const std::size_t stride = grid.stride();
  const Poisson1dSolver solver(opt.fine);
  Dataset ds{"poisson1d", Tensor({n, opt.coarse}), Tensor({n, opt.coarse}), grid, {}};
  std::vector<double> residual(n);
  parallel_chunks(n, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> c(opt.modes);
    for (std::size_t s = lo; s < hi; ++s) {
      Rng rng(derive_seed(seed, 101, s));
      for (double& ck : c) ck = rng.uniform();
      const Vector f = poisson1d_rhs(c, opt.fine);
      const Vector u = solver.solve(f);
      residual[s] = (solver.matrix() * u - f).norm() / f.norm();
      for (std::size_t i = 0; i < opt.coarse; ++i) {
        ds.inputs[s * opt.coarse + i] = f[static_cast<Eigen::Index>(i * stride)];
        ds.targets[s * opt.coarse + i] = u[static_cast<Eigen::Index>(i * stride)];
      }
    }
  });
  ds.meta = {{"generator_version", kGeneratorVersion},
             {"seed", seed},
             {"samples", n},
             {"modes", opt.modes},
             {"coefficients", "c_k ~ U(0,1), f = sum_k c_k sin(2 k pi x)"},
             {"stencil", "(1,-16,30,-16,1)/(12h^2) interior, (-1,2,-1)/h^2 at rows 1 and n-2, Dirichlet rows at 0 and n-1"},
             {"rhs_zeroed", "first two and last two points"},
             {"solver", "sparse LU, factored once, two refinement steps"},
             {"max_relative_residual", *std::max_element(residual.begin(), residual.end())},
             {"sub_seed", "derive_seed(seed, 101, sample)"}};
  return ds;
}

// ---------------------------------------------------------------- 2D Poisson

struct Poisson2dOptions {
  std::size_t fine = 128;
  std::size_t coarse = 64;
  std::size_t max_modes = 10;
};

/// Nine-point fourth-order discretization of -Laplace(u) on the interior
/// unknowns of an n x n grid (row-major, x first), Dirichlet boundary.
inline SparseMatrix poisson2d_operator(std::size_t n) {
  if (n < 3) throw ConfigError("poisson2d: need at least 3 grid points per mode");
  const auto m = static_cast<int>(n - 2);
  const double h = 1.0 / static_cast<double>(n - 1);
  const double s = 1.0 / (6 * h * h);
  std::vector<Eigen::Triplet<double>> t;
  auto id = [m](int i, int j) { return i * m + j; };
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      t.emplace_back(id(i, j), id(i, j), 20 * s);
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if ((di == 0 && dj == 0) || i + di < 0 || i + di >= m || j + dj < 0 || j + dj >= m) continue;
          const double w = (di == 0 || dj == 0) ? -4 * s : -s;
          t.emplace_back(id(i, j), id(i + di, j + dj), w);
        }
    }
  SparseMatrix a(m * m, m * m);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

/// Interior right-hand side (I + h^2/12 Laplace_5) f of the fourth-order scheme.
inline Vector poisson2d_corrected_rhs(const DenseMatrix& f) {
  const auto n = f.rows();
  const auto m = n - 2;
  Vector b(m * m);
  for (Eigen::Index i = 1; i <= m; ++i)
    for (Eigen::Index j = 1; j <= m; ++j)
      b[(i - 1) * m + (j - 1)] = (8 * f(i, j) + f(i - 1, j) + f(i + 1, j) + f(i, j - 1) + f(i, j + 1)) / 12.0;
  return b;
}

/// f(x, y) = sum c(kx, ky) sin(2 pi kx x) sin(2 pi ky y), zero on the boundary.
inline DenseMatrix poisson2d_rhs(const DenseMatrix& c, std::size_t n) {
  const auto N = static_cast<Eigen::Index>(n);
  DenseMatrix sx(c.rows(), N), sy(c.cols(), N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n - 1);
    for (Eigen::Index k = 0; k < c.rows(); ++k) sx(k, i) = std::sin(2.0 * std::numbers::pi * static_cast<double>(k + 1) * x);
    for (Eigen::Index k = 0; k < c.cols(); ++k) sy(k, i) = std::sin(2.0 * std::numbers::pi * static_cast<double>(k + 1) * x);
  }
  DenseMatrix f = sx.transpose() * c * sy;
  f.row(0).setZero();
  f.row(N - 1).setZero();
  f.col(0).setZero();
  f.col(N - 1).setZero();
  return f;
}

class Poisson2dSolver {
 public:
  explicit Poisson2dSolver(std::size_t n) : n_(n), a_(poisson2d_operator(n)) {
    ldlt_.compute(a_);
    if (ldlt_.info() != Eigen::Success) throw ComputeError("poisson2d: sparse factorization failed");
  }
  const SparseMatrix& matrix() const { return a_; }
  /// Full n x n solution including the zero boundary.
  DenseMatrix solve(const DenseMatrix& f) const {
    const auto N = static_cast<Eigen::Index>(n_);
    if (f.rows() != N || f.cols() != N) throw ShapeError("poisson2d: rhs must be n x n");
    const Vector x = ldlt_.solve(poisson2d_corrected_rhs(f));
    if (ldlt_.info() != Eigen::Success || !x.allFinite()) throw ComputeError("poisson2d: solve failed");
    DenseMatrix u = DenseMatrix::Zero(N, N);
    const auto m = N - 2;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) u(i + 1, j + 1) = x[i * m + j];
    return u;
  }

  /// ||A u_interior - rhs|| / ||rhs|| for the system solve() inverts.
  double relative_residual(const DenseMatrix& u, const DenseMatrix& f) const {
    const auto m = static_cast<Eigen::Index>(n_ - 2);
    Vector x(m * m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) x[i * m + j] = u(i + 1, j + 1);
    const Vector b = poisson2d_corrected_rhs(f);
    return (a_ * x - b).norm() / b.norm();
  }

 private:
  std::size_t n_;
  SparseMatrix a_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

/// Mode counts Kx, Ky ~ U{1..max_modes} per sample; c ~ U(0,1) for kx <= Kx, ky <= Ky.
inline DenseMatrix poisson2d_coefficients(Rng& rng, std::size_t max_modes) {
  const std::size_t kx = 1 + rng.below(max_modes), ky = 1 + rng.below(max_modes);
  DenseMatrix c = DenseMatrix::Zero(static_cast<Eigen::Index>(max_modes), static_cast<Eigen::Index>(max_modes));
  for (std::size_t i = 0; i < kx; ++i)
    for (std::size_t j = 0; j < ky; ++j) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.uniform();
  return c;
}

inline Dataset gen_poisson_2d(std::size_t n, std::uint64_t seed, const Poisson2dOptions& opt = {}) {
  if (n == 0) throw ConfigError("poisson2d: n must be >= 1");
  GridSpec grid = unit_grid({opt.coarse, opt.coarse}, {opt.fine, opt.fine});
  const std::size_t stride = grid.stride();
  const Poisson2dSolver solver(opt.fine);
  const std::size_t m = opt.coarse * opt.coarse;
  Dataset ds{"poisson2d", Tensor({n, opt.coarse, opt.coarse}), Tensor({n, opt.coarse, opt.coarse}), grid, {}};
  std::vector<double> residual(n);
  parallel_chunks(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      Rng rng(derive_seed(seed, 102, s));
      const DenseMatrix f = poisson2d_rhs(poisson2d_coefficients(rng, opt.max_modes), opt.fine);
      const DenseMatrix u = solver.solve(f);
      residual[s] = solver.relative_residual(u, f);
      for (std::size_t i = 0; i < opt.coarse; ++i)
        for (std::size_t j = 0; j < opt.coarse; ++j) {
          const auto fi = static_cast<Eigen::Index>(i * stride), fj = static_cast<Eigen::Index>(j * stride);
          ds.inputs[s * m + i * opt.coarse + j] = f(fi, fj);
          ds.targets[s * m + i * opt.coarse + j] = u(fi, fj);
        }
    }
  });
  ds.meta = {{"generator_version", kGeneratorVersion},
             {"seed", seed},
             {"samples", n},
             {"max_modes", opt.max_modes},
             {"coefficients", "Kx, Ky ~ U{1..max_modes}; c ~ U(0,1) for kx <= Kx, ky <= Ky"},
             {"stencil", "nine-point (20,-4,-1)/(6h^2) with rhs (8f + f_N + f_S + f_E + f_W)/12"},
             {"solver", "sparse LDLT, factored once"},
             {"max_relative_residual", *std::max_element(residual.begin(), residual.end())},
             {"layout", "row-major, first mode is x"},
             {"sub_seed", "derive_seed(seed, 102, sample)"}};
  return ds;
}

}  // namespace nhss
