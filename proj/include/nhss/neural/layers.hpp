#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nhss/core/rng.hpp"
#include "nhss/hss/hss_matrix.hpp"
#include "nhss/hss/matvec.hpp"
#include "nhss/neural/activation.hpp"
#include "nhss/neural/tensor.hpp"

namespace nhss {

/// HSS matrix followed by a learnable-slope LeakyReLU: y = act_alpha(W x).
/// No bias. The same type doubles as its own gradient container.
struct HssLinearLayer {
  HssMatrix weight;
  double alpha = 1.0;
  bool use_activation = true;

  std::size_t in_size() const { return weight.size(); }
  std::size_t out_size() const { return weight.size(); }
};

struct HssLayerTape {
  HssTape hss;
  Tensor pre;  // pre-activation, kept only when the activation is on
  Shape in_shape;
};

inline Tensor hss_layer_apply(const HssLinearLayer& layer, const Tensor& x, HssLayerTape* tape = nullptr) {
  require(x.sample_size() == layer.in_size(), "hss layer: sample size " + std::to_string(x.sample_size()) +
                                                  " != d=" + std::to_string(layer.in_size()));
  DenseMatrix y = hss_matvec_batch(layer.weight, x.rows(), tape ? &tape->hss : nullptr);
  Tensor pre = Tensor::from_rows(y, x.shape());
  if (tape) tape->in_shape = x.shape();
  if (!layer.use_activation) return pre;
  Tensor out = leaky_relu(pre, layer.alpha);
  if (tape) tape->pre = std::move(pre);
  return out;
}

/// Returns dL/dx and accumulates parameter gradients into `grad`.
inline Tensor hss_layer_vjp(const HssLinearLayer& layer, const HssLayerTape& tape, const Tensor& dy,
                            HssLinearLayer& grad) {
  require(dy.shape() == tape.in_shape, "hss layer vjp: gradient shape " + shape_str(dy.shape()) +
                                           " does not match the recorded forward " + shape_str(tape.in_shape));
  Tensor dpre = dy;
  if (layer.use_activation) {
    auto g = leaky_relu_vjp(tape.pre, layer.alpha, dy);
    grad.alpha += g.dalpha;
    dpre = std::move(g.dx);
  }
  DenseMatrix dx = hss_vjp_batch(layer.weight, tape.hss, dpre.rows(), grad.weight);
  return Tensor::from_rows(dx, tape.in_shape);
}

/// m-dimensional HSS layer: sum over k of Z x_1 W_1^(k) x_2 ... x_m W_m^(k),
/// followed by the activation. factors[k][j] acts on spatial mode j.
struct NdHssLayer {
  std::size_t modes = 1;
  std::vector<std::vector<HssMatrix>> factors;
  double alpha = 1.0;
  bool use_activation = true;

  std::size_t outer_rank() const { return factors.size(); }
  std::size_t extent() const { return factors.empty() ? 0 : factors[0][0].size(); }
  std::size_t in_size() const {
    std::size_t n = 1;
    for (std::size_t j = 0; j < modes; ++j) n *= extent();
    return n;
  }
  std::size_t out_size() const { return in_size(); }
  Shape sample_shape() const { return Shape(modes, extent()); }
};

inline NdHssLayer make_nd_hss_layer(std::size_t modes, std::size_t d, std::size_t depth, std::size_t rank,
                                    std::size_t outer_rank, std::uint64_t seed, double scale = 1.0) {
  if (modes == 0 || outer_rank == 0) throw ConfigError("nd hss layer: modes and outer rank must be positive");
  NdHssLayer layer;
  layer.modes = modes;
  ClusterTree tree(d, depth);
  for (std::size_t k = 0; k < outer_rank; ++k) {
    layer.factors.emplace_back();
    for (std::size_t j = 0; j < modes; ++j)
      layer.factors.back().push_back(hss_random(tree, rank, derive_seed(seed, k, j), scale));
  }
  return layer;
}

struct NdHssTape {
  Shape in_shape;           // as passed in
  Shape work_shape;         // (B, d, ..., d)
  std::vector<std::vector<HssTape>> hss;  // [k][j]
  Tensor pre;
};

namespace detail {

// Applies an HSS operator to every fiber along `axis` of t.
inline Tensor apply_along_axis(const HssMatrix& h, const Tensor& t, std::size_t axis, HssTape* tape) {
  Tensor moved = move_axis_to_last(t, axis);
  const std::size_t d = h.size();
  Eigen::Map<const DenseMatrix> fibers(moved.data().data(), static_cast<Eigen::Index>(moved.size() / d),
                                       static_cast<Eigen::Index>(d));
  DenseMatrix y = hss_matvec_batch(h, fibers, tape);
  Tensor ty = Tensor::from_rows(y, moved.shape());
  return move_last_to_axis(ty, axis, t.shape());
}

inline Tensor vjp_along_axis(const HssMatrix& h, const HssTape& tape, const Tensor& dy, std::size_t axis,
                             HssMatrix& grad) {
  Tensor moved = move_axis_to_last(dy, axis);
  const std::size_t d = h.size();
  Eigen::Map<const DenseMatrix> fibers(moved.data().data(), static_cast<Eigen::Index>(moved.size() / d),
                                       static_cast<Eigen::Index>(d));
  DenseMatrix dx = hss_vjp_batch(h, tape, fibers, grad);
  return move_last_to_axis(Tensor::from_rows(dx, moved.shape()), axis, dy.shape());
}

}  // namespace detail

/// Every modal contraction runs as a batched HSS matvec over the fibers of
/// that mode; no factor is ever densified.
inline Tensor nd_hss_apply(const NdHssLayer& layer, const Tensor& z, NdHssTape* tape = nullptr) {
  require(layer.outer_rank() > 0, "nd hss layer: no factors");
  require(z.sample_size() == layer.in_size(), "nd hss layer: sample shape " + shape_str(z.sample_shape()) +
                                                  " does not hold " + std::to_string(layer.modes) + " modes of extent " +
                                                  std::to_string(layer.extent()));
  Shape work{z.batch()};
  for (std::size_t j = 0; j < layer.modes; ++j) work.push_back(layer.extent());
  Tensor zw = z.reshaped(work);
  if (tape) {
    tape->in_shape = z.shape();
    tape->work_shape = work;
    tape->hss.assign(layer.outer_rank(), std::vector<HssTape>(layer.modes));
  }
  Tensor acc;
  for (std::size_t k = 0; k < layer.outer_rank(); ++k) {
    Tensor t = zw;
    for (std::size_t j = 0; j < layer.modes; ++j)
      t = detail::apply_along_axis(layer.factors[k][j], t, j + 1, tape ? &tape->hss[k][j] : nullptr);
    if (k == 0) {
      acc = std::move(t);
    } else {
      auto a = acc.data();
      const auto b = t.data();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    }
  }
  acc = acc.reshaped(z.shape());
  if (!layer.use_activation) return acc;
  Tensor out = leaky_relu(acc, layer.alpha);
  if (tape) tape->pre = std::move(acc);
  return out;
}

inline Tensor nd_hss_vjp(const NdHssLayer& layer, const NdHssTape& tape, const Tensor& dout, NdHssLayer& grad) {
  require(dout.shape() == tape.in_shape, "nd hss vjp: gradient shape does not match the recorded forward");
  require(tape.hss.size() == layer.outer_rank(), "nd hss vjp: tape does not belong to this layer");
  Tensor dpre = dout;
  if (layer.use_activation) {
    auto g = leaky_relu_vjp(tape.pre, layer.alpha, dout);
    grad.alpha += g.dalpha;
    dpre = std::move(g.dx);
  }
  Tensor dw = dpre.reshaped(tape.work_shape);
  Tensor dz;
  for (std::size_t k = 0; k < layer.outer_rank(); ++k) {
    Tensor g = dw;
    for (std::size_t j = layer.modes; j-- > 0;)
      g = detail::vjp_along_axis(layer.factors[k][j], tape.hss[k][j], g, j + 1, grad.factors[k][j]);
    if (k == 0) {
      dz = std::move(g);
    } else {
      auto a = dz.data();
      const auto b = g.data();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    }
  }
  return dz.reshaped(tape.in_shape);
}

/// Unstructured layer used by the dense baseline: y = act_alpha(W x).
struct DenseLayer {
  DenseMatrix weight;  // out x in
  double alpha = 1.0;
  bool use_activation = true;

  std::size_t in_size() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_size() const { return static_cast<std::size_t>(weight.rows()); }
};

inline DenseLayer make_dense_layer(std::size_t out, std::size_t in, std::uint64_t seed, double scale = 1.0) {
  DenseLayer l;
  l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  Rng rng(seed);
  const double s = scale / std::sqrt(static_cast<double>(in));
  for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = rng.uniform(-s, s);
  return l;
}

struct DenseLayerTape {
  Tensor in;
  Tensor pre;
};

inline Tensor dense_layer_apply(const DenseLayer& layer, const Tensor& x, DenseLayerTape* tape = nullptr) {
  require(x.sample_size() == layer.in_size(), "dense layer: sample size " + std::to_string(x.sample_size()) +
                                                  " != " + std::to_string(layer.in_size()));
  DenseMatrix y = x.rows() * layer.weight.transpose();
  Tensor pre = Tensor::from_rows(y, {x.batch(), layer.out_size()});
  if (tape) tape->in = x;
  if (!layer.use_activation) return pre;
  Tensor out = leaky_relu(pre, layer.alpha);
  if (tape) tape->pre = std::move(pre);
  return out;
}

inline Tensor dense_layer_vjp(const DenseLayer& layer, const DenseLayerTape& tape, const Tensor& dy,
                              DenseLayer& grad) {
  require(dy.batch() == tape.in.batch() && dy.sample_size() == layer.out_size(),
          "dense layer vjp: gradient shape mismatch");
  Tensor dpre = dy;
  if (layer.use_activation) {
    auto g = leaky_relu_vjp(tape.pre, layer.alpha, dy);
    grad.alpha += g.dalpha;
    dpre = std::move(g.dx);
  }
  grad.weight.noalias() += dpre.rows().transpose() * tape.in.rows();
  DenseMatrix dx = dpre.rows() * layer.weight;
  return Tensor::from_rows(dx, tape.in.shape());
}

}  // namespace nhss
