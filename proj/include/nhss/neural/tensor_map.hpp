#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nhss/core/rng.hpp"
#include "nhss/neural/tensor.hpp"

namespace nhss {

/// Linear map between sample tensors,
///   out_a = sum_b W_{a,b} Z_b,
/// stored either densely (W is out_size x in_size) or as a CP expansion
///   W = sum_i c_i u_i^(1) x ... x u_i^(m) x v_i^(1) x ... x v_i^(M).
/// Used for lifting and projection.
struct LinearTensorMap {
  enum class Kind { Dense, Cp };

  Kind kind = Kind::Dense;
  Shape in_shape, out_shape;
  DenseMatrix dense;              // Dense: out_size x in_size
  Vector c;                       // Cp: r
  std::vector<DenseMatrix> u;     // Cp: per output mode, r x d_j
  std::vector<DenseMatrix> v;     // Cp: per input mode, r x D_j

  std::size_t in_size() const { return shape_size(in_shape); }
  std::size_t out_size() const { return shape_size(out_shape); }
  std::size_t cp_rank() const { return static_cast<std::size_t>(c.size()); }

  std::size_t param_count() const {
    if (kind == Kind::Dense) return static_cast<std::size_t>(dense.size());
    std::size_t n = static_cast<std::size_t>(c.size());
    for (const auto& m : u) n += static_cast<std::size_t>(m.size());
    for (const auto& m : v) n += static_cast<std::size_t>(m.size());
    return n;
  }
};

inline LinearTensorMap make_dense_map(Shape in, Shape out, std::uint64_t seed, double scale = 1.0) {
  LinearTensorMap m;
  m.kind = LinearTensorMap::Kind::Dense;
  m.in_shape = std::move(in);
  m.out_shape = std::move(out);
  m.dense.resize(static_cast<Eigen::Index>(m.out_size()), static_cast<Eigen::Index>(m.in_size()));
  Rng rng(seed);
  const double s = scale / std::sqrt(static_cast<double>(m.in_size()));
  for (Eigen::Index i = 0; i < m.dense.size(); ++i) m.dense.data()[i] = rng.uniform(-s, s);
  return m;
}

inline LinearTensorMap make_cp_map(Shape in, Shape out, std::size_t rank, std::uint64_t seed, double scale = 1.0) {
  if (rank == 0) throw ConfigError("cp tensor map: rank must be positive");
  LinearTensorMap m;
  m.kind = LinearTensorMap::Kind::Cp;
  m.in_shape = std::move(in);
  m.out_shape = std::move(out);
  const auto r = static_cast<Eigen::Index>(rank);
  Rng rng(seed);
  m.c.resize(r);
  for (auto& x : m.c) x = rng.uniform(-scale, scale) / std::sqrt(static_cast<double>(rank));
  auto fill = [&](std::size_t n) {
    DenseMatrix f(r, static_cast<Eigen::Index>(n));
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform(-s, s) * std::sqrt(3.0);
    return f;
  };
  for (std::size_t e : m.out_shape) m.u.push_back(fill(e));
  for (std::size_t e : m.in_shape) m.v.push_back(fill(e));
  return m;
}

namespace detail {

// Row i holds the row-major Kronecker product of factors[j].row(i).
inline DenseMatrix kron_rows(const std::vector<DenseMatrix>& factors, Eigen::Index r) {
  std::size_t n = 1;
  for (const auto& f : factors) n *= static_cast<std::size_t>(f.cols());
  DenseMatrix out(r, static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < r; ++i) {
    std::vector<double> cur{1.0};
    for (const auto& f : factors) {
      std::vector<double> next;
      next.reserve(cur.size() * static_cast<std::size_t>(f.cols()));
      for (double a : cur)
        for (Eigen::Index j = 0; j < f.cols(); ++j) next.push_back(a * f(i, j));
      cur.swap(next);
    }
    for (std::size_t k = 0; k < n; ++k) out(i, static_cast<Eigen::Index>(k)) = cur[k];
  }
  return out;
}

// Gradient of row i of kron_rows w.r.t. each factor row, given dK (r x n).
inline void kron_rows_vjp(const std::vector<DenseMatrix>& factors, const DenseMatrix& dk,
                          std::vector<DenseMatrix>& grads) {
  const std::size_t m = factors.size();
  std::vector<std::size_t> ext(m);
  for (std::size_t j = 0; j < m; ++j) ext[j] = static_cast<std::size_t>(factors[j].cols());
  const std::size_t n = static_cast<std::size_t>(dk.cols());
  std::vector<std::size_t> idx(m);
  for (Eigen::Index i = 0; i < dk.rows(); ++i) {
    std::fill(idx.begin(), idx.end(), 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
      const double g = dk(i, static_cast<Eigen::Index>(flat));
      for (std::size_t j = 0; j < m; ++j) {
        double p = g;
        for (std::size_t l = 0; l < m; ++l)
          if (l != j) p *= factors[l](i, static_cast<Eigen::Index>(idx[l]));
        grads[j](i, static_cast<Eigen::Index>(idx[j])) += p;
      }
      for (std::size_t j = m; j-- > 0;) {
        if (++idx[j] < ext[j]) break;
        idx[j] = 0;
      }
    }
  }
}

}  // namespace detail

/// Dense-expanded coefficient tensor (out_size x in_size). Test oracle and
/// debugging aid; the apply path never builds it for the CP variant.
inline DenseMatrix expand_tensor_map(const LinearTensorMap& m) {
  if (m.kind == LinearTensorMap::Kind::Dense) return m.dense;
  const auto r = static_cast<Eigen::Index>(m.cp_rank());
  DenseMatrix uu = detail::kron_rows(m.u, r), vv = detail::kron_rows(m.v, r);
  return uu.transpose() * m.c.asDiagonal() * vv;
}

struct TensorMapTape {
  Tensor in;
  DenseMatrix s;  // Cp: B x r contractions <v_i, Z_b>
  DenseMatrix uu, vv;
};

inline Tensor tensor_map_apply(const LinearTensorMap& m, const Tensor& z, TensorMapTape* tape = nullptr) {
  require(z.sample_shape() == m.in_shape || (z.sample_size() == m.in_size() && z.rank() == 2),
          "tensor map: input sample shape " + shape_str(z.sample_shape()) + " != " + shape_str(m.in_shape));
  Shape out_shape{z.batch()};
  out_shape.insert(out_shape.end(), m.out_shape.begin(), m.out_shape.end());
  if (tape) tape->in = z;
  if (m.kind == LinearTensorMap::Kind::Dense) {
    DenseMatrix y = z.rows() * m.dense.transpose();
    return Tensor::from_rows(y, out_shape);
  }
  const auto r = static_cast<Eigen::Index>(m.cp_rank());
  DenseMatrix uu = detail::kron_rows(m.u, r), vv = detail::kron_rows(m.v, r);
  DenseMatrix s = z.rows() * vv.transpose();
  DenseMatrix y = (s * m.c.asDiagonal()) * uu;
  if (tape) {
    tape->s = std::move(s);
    tape->uu = std::move(uu);
    tape->vv = std::move(vv);
  }
  return Tensor::from_rows(y, out_shape);
}

inline Tensor tensor_map_vjp(const LinearTensorMap& m, const TensorMapTape& tape, const Tensor& dout,
                             LinearTensorMap& grad) {
  require(dout.batch() == tape.in.batch() && dout.sample_size() == m.out_size(),
          "tensor map vjp: gradient shape mismatch");
  if (m.kind == LinearTensorMap::Kind::Dense) {
    grad.dense.noalias() += dout.rows().transpose() * tape.in.rows();
    DenseMatrix dz = dout.rows() * m.dense;
    return Tensor::from_rows(dz, tape.in.shape());
  }
  DenseMatrix p = dout.rows() * tape.uu.transpose();  // B x r
  grad.c += (tape.s.cwiseProduct(p)).colwise().sum().transpose();
  DenseMatrix ds = p * m.c.asDiagonal();
  DenseMatrix duu = (tape.s * m.c.asDiagonal()).transpose() * dout.rows();
  DenseMatrix dvv = ds.transpose() * tape.in.rows();
  detail::kron_rows_vjp(m.u, duu, grad.u);
  detail::kron_rows_vjp(m.v, dvv, grad.v);
  DenseMatrix dz = ds * tape.vv;
  return Tensor::from_rows(dz, tape.in.shape());
}

}  // namespace nhss
