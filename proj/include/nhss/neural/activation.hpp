#pragma once

#include "nhss/neural/tensor.hpp"

namespace nhss {

/// LeakyReLU with slope `alpha` on the negative half-line.
inline Tensor leaky_relu(const Tensor& x, double alpha) {
  Tensor y = x;
  for (double& v : y.data())
    if (v < 0) v *= alpha;
  return y;
}

struct LeakyReluGrad {
  Tensor dx;
  double dalpha = 0.0;
};

/// Reverse pass given the pre-activation `x`. dalpha sums dy * x over the
/// negative entries, in storage order.
inline LeakyReluGrad leaky_relu_vjp(const Tensor& x, double alpha, const Tensor& dy) {
  require(x.shape() == dy.shape(), "leaky_relu_vjp: shape mismatch " + shape_str(x.shape()) + " vs " +
                                       shape_str(dy.shape()));
  LeakyReluGrad g{dy, 0.0};
  const auto xs = x.data();
  auto dx = g.dx.data();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < 0) {
      g.dalpha += dx[i] * xs[i];
      dx[i] *= alpha;
    }
  }
  return g;
}

}  // namespace nhss
