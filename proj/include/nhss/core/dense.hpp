#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "nhss/core/error.hpp"

namespace nhss {

/// Row-major double-precision matrix. All structured blocks use this layout
/// so that on-disk parameter blocks are row-major as well.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using VecMap = Eigen::Map<Vector>;
using ConstVecMap = Eigen::Map<const Vector>;

inline VecMap as_vec(std::span<double> s) { return VecMap(s.data(), static_cast<Eigen::Index>(s.size())); }
inline ConstVecMap as_vec(std::span<const double> s) {
  return ConstVecMap(s.data(), static_cast<Eigen::Index>(s.size()));
}

inline std::span<double> as_span(DenseMatrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
inline std::span<const double> as_span(const DenseMatrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

inline bool all_finite(std::span<const double> s) {
  for (double v : s)
    if (!std::isfinite(v)) return false;
  return true;
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

}  // namespace nhss
