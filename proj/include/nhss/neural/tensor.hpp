#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nhss/core/dense.hpp"

namespace nhss {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out + ")";
}

/// Dense row-major tensor of doubles. Batched tensors carry the batch as
/// their leading extent.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw ShapeError("tensor: " + std::to_string(data_.size()) + " entries for shape " + shape_str(shape_));
  }

  /// Copies a B x n row-major matrix into a tensor of the given shape.
  static Tensor from_rows(const DenseMatrix& m, Shape shape) {
    Tensor t(std::move(shape));
    require(t.size() == static_cast<std::size_t>(m.size()), "tensor: matrix size does not match shape");
    std::copy(m.data(), m.data() + m.size(), t.data_.begin());
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t batch() const { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t sample_size() const { return batch() == 0 ? 0 : size() / batch(); }
  Shape sample_shape() const { return shape_.empty() ? Shape{} : Shape(shape_.begin() + 1, shape_.end()); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Batch x sample_size row-major view.
  Eigen::Map<DenseMatrix> rows() {
    return {data_.data(), static_cast<Eigen::Index>(batch()), static_cast<Eigen::Index>(sample_size())};
  }
  Eigen::Map<const DenseMatrix> rows() const {
    return {data_.data(), static_cast<Eigen::Index>(batch()), static_cast<Eigen::Index>(sample_size())};
  }

  std::span<double> sample(std::size_t b) { return std::span<double>(data_).subspan(b * sample_size(), sample_size()); }
  std::span<const double> sample(std::size_t b) const {
    return std::span<const double>(data_).subspan(b * sample_size(), sample_size());
  }

  Tensor reshaped(Shape shape) const {
    require(shape_size(shape) == size(), "tensor: cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }

  /// Rows [lo, hi) of the leading dimension.
  Tensor slice(std::size_t lo, std::size_t hi) const {
    Shape s = shape_;
    s[0] = hi - lo;
    const std::size_t n = sample_size();
    return Tensor(std::move(s), std::vector<double>(data_.begin() + lo * n, data_.begin() + hi * n));
  }

  /// Rows picked by index, in the given order.
  Tensor gather(std::span<const std::size_t> idx) const {
    Shape s = shape_;
    s[0] = idx.size();
    Tensor out(std::move(s));
    const std::size_t n = sample_size();
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(data_.begin() + idx[i] * n, n, out.data_.begin() + i * n);
    return out;
  }

  double max_abs() const {
    double m = 0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Bitwise equality (distinguishes -0.0 from 0.0 and compares NaN payloads).
inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), sizeof(double) * a.size()) == 0;
}

/// Moves axis `axis` to the end: (pre, n, post) -> (pre, post, n).
inline Tensor move_axis_to_last(const Tensor& t, std::size_t axis) {
  const Shape& s = t.shape();
  if (axis + 1 == s.size()) return t;
  std::size_t pre = 1, post = 1;
  for (std::size_t i = 0; i < axis; ++i) pre *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) post *= s[i];
  const std::size_t n = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  out_shape.push_back(n);
  Tensor out(out_shape);
  const auto in = t.data();
  auto o = out.data();
  for (std::size_t p = 0; p < pre; ++p)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t q = 0; q < post; ++q) o[(p * post + q) * n + j] = in[(p * n + j) * post + q];
  return out;
}

/// Inverse of move_axis_to_last: (pre, post, n) -> (pre, n, post), with the
/// result reshaped to `target`.
inline Tensor move_last_to_axis(const Tensor& t, std::size_t axis, const Shape& target) {
  if (axis + 1 == target.size()) return t.reshaped(target);
  std::size_t pre = 1, post = 1;
  for (std::size_t i = 0; i < axis; ++i) pre *= target[i];
  for (std::size_t i = axis + 1; i < target.size(); ++i) post *= target[i];
  const std::size_t n = target[axis];
  require(t.size() == pre * post * n, "move_last_to_axis: size mismatch");
  Tensor out(target);
  const auto in = t.data();
  auto o = out.data();
  for (std::size_t p = 0; p < pre; ++p)
    for (std::size_t q = 0; q < post; ++q)
      for (std::size_t j = 0; j < n; ++j) o[(p * n + j) * post + q] = in[(p * post + q) * n + j];
  return out;
}

}  // namespace nhss
