#pragma once

#include <cstddef>
#include <string>

#include "nhss/neural/tensor.hpp"

namespace nhss {

/// k-th modal product (Z x_k W)_{..i_k..} = sum_j Z_{..j..} W(i_k, j) for a
/// dense W of shape D_k x d_k. `mode` indexes the tensor's axes directly.
inline Tensor modal_product(const Tensor& z, const DenseMatrix& w, std::size_t mode) {
  require(mode < z.rank(), "modal_product: mode " + std::to_string(mode) + " out of range for " + shape_str(z.shape()));
  const std::size_t dk = z.extent(mode);
  require(static_cast<std::size_t>(w.cols()) == dk,
          "modal_product: W has " + std::to_string(w.cols()) + " columns, mode extent is " + std::to_string(dk));
  std::size_t pre = 1, post = 1;
  for (std::size_t i = 0; i < mode; ++i) pre *= z.extent(i);
  for (std::size_t i = mode + 1; i < z.rank(); ++i) post *= z.extent(i);
  Shape s = z.shape();
  s[mode] = static_cast<std::size_t>(w.rows());
  Tensor out(s);
  const auto D = static_cast<Eigen::Index>(w.rows());
  for (std::size_t p = 0; p < pre; ++p) {
    Eigen::Map<const DenseMatrix> in(z.data().data() + p * dk * post, static_cast<Eigen::Index>(dk),
                                     static_cast<Eigen::Index>(post));
    Eigen::Map<DenseMatrix> o(out.data().data() + p * D * post, D, static_cast<Eigen::Index>(post));
    o.noalias() = w * in;
  }
  return out;
}

}  // namespace nhss
