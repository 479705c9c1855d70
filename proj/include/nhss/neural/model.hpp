#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "nhss/neural/layers.hpp"
#include "nhss/neural/tensor_map.hpp"

namespace nhss {

using Layer = std::variant<HssLinearLayer, NdHssLayer, DenseLayer>;

/// lift -> layers -> project. Lift/project are optional (identity when
/// absent). `residual_scale` is set for time-stepping models that predict
/// normalized increments; `input_scale`/`output_scale` hold the max-rescaling
/// used for steady-state problems.
struct NeuralHssModel {
  std::optional<LinearTensorMap> lift;
  std::vector<Layer> layers;
  std::optional<LinearTensorMap> project;

  std::optional<double> residual_scale;
  double input_scale = 1.0;
  double output_scale = 1.0;
  std::uint64_t seed = 0;
  double init_scale = 1.0;  // scale passed to the weight initializer
};

enum class ParamKind { Weight, Alpha };

namespace detail {

template <class M, class F>
void visit_map_params(M& m, F& f) {
  if (m.kind == LinearTensorMap::Kind::Dense) {
    f(as_span(m.dense), ParamKind::Weight);
    return;
  }
  f(std::span(m.c.data(), static_cast<std::size_t>(m.c.size())), ParamKind::Weight);
  for (auto& x : m.u) f(as_span(x), ParamKind::Weight);
  for (auto& x : m.v) f(as_span(x), ParamKind::Weight);
}

template <class H, class F>
void visit_hss_params(H& h, F& f) {
  h.for_each_block([&](auto& blk) { f(as_span(blk), ParamKind::Weight); });
}

}  // namespace detail

/// Visits every parameter block in declaration order as (span, kind):
/// lift, then per layer its weights followed by its alpha, then project.
/// Works on const and non-const models alike, so a gradient set built by
/// zeros_like() is traversed congruently with its model.
template <class Model, class F>
void for_each_param(Model& model, F&& f) {
  if (model.lift) detail::visit_map_params(*model.lift, f);
  for (auto& layer : model.layers) {
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, HssLinearLayer>) {
            detail::visit_hss_params(l.weight, f);
          } else if constexpr (std::is_same_v<L, NdHssLayer>) {
            for (auto& row : l.factors)
              for (auto& h : row) detail::visit_hss_params(h, f);
          } else {
            f(as_span(l.weight), ParamKind::Weight);
          }
          f(std::span(&l.alpha, 1), ParamKind::Alpha);
        },
        layer);
  }
  if (model.project) detail::visit_map_params(*model.project, f);
}

/// Same structure, every parameter zero. Serves as the gradient set.
inline NeuralHssModel zeros_like(const NeuralHssModel& m) {
  NeuralHssModel g = m;
  for_each_param(g, [](std::span<double> s, ParamKind) { std::fill(s.begin(), s.end(), 0.0); });
  return g;
}

inline std::size_t param_count(const NeuralHssModel& m) {
  std::size_t n = 0;
  for_each_param(m, [&](std::span<const double> s, ParamKind) { n += s.size(); });
  return n;
}

inline std::vector<double*> alpha_refs(NeuralHssModel& m) {
  std::vector<double*> out;
  for (auto& layer : m.layers) std::visit([&](auto& l) { out.push_back(&l.alpha); }, layer);
  return out;
}

inline std::vector<double> alphas(const NeuralHssModel& m) {
  std::vector<double> out;
  for (const auto& layer : m.layers) std::visit([&](const auto& l) { out.push_back(l.alpha); }, layer);
  return out;
}

inline std::size_t layer_param_count(const NdHssLayer& l) {
  std::size_t n = 1;
  for (const auto& row : l.factors)
    for (const auto& h : row) n += hss_param_count(h);
  return n;
}

struct ModelTape {
  std::optional<TensorMapTape> lift;
  std::vector<std::variant<HssLayerTape, NdHssTape, DenseLayerTape>> layers;
  std::optional<TensorMapTape> project;
  Shape in_shape;
};

/// Exact composition of lift, layers and project. Pass a tape to record the
/// intermediates needed by model_vjp.
inline Tensor model_forward(const NeuralHssModel& model, const Tensor& x, ModelTape* tape = nullptr) {
  if (tape) {
    tape->layers.clear();
    tape->in_shape = x.shape();
    tape->lift.reset();
    tape->project.reset();
  }
  Tensor h = x;
  if (model.lift) {
    if (tape) tape->lift.emplace();
    h = tensor_map_apply(*model.lift, h, tape ? &*tape->lift : nullptr);
  }
  for (const auto& layer : model.layers) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, HssLinearLayer>) {
            HssLayerTape* t = tape ? &std::get<HssLayerTape>(tape->layers.emplace_back(HssLayerTape{})) : nullptr;
            h = hss_layer_apply(l, h, t);
          } else if constexpr (std::is_same_v<L, NdHssLayer>) {
            NdHssTape* t = tape ? &std::get<NdHssTape>(tape->layers.emplace_back(NdHssTape{})) : nullptr;
            h = nd_hss_apply(l, h, t);
          } else {
            DenseLayerTape* t = tape ? &std::get<DenseLayerTape>(tape->layers.emplace_back(DenseLayerTape{})) : nullptr;
            h = dense_layer_apply(l, h, t);
          }
        },
        layer);
  }
  if (model.project) {
    if (tape) tape->project.emplace();
    h = tensor_map_apply(*model.project, h, tape ? &*tape->project : nullptr);
  }
  return h;
}

/// Chains the component vjps in reverse. Gradients accumulate into `grad`
/// (from zeros_like(model)); returns dL/dx.
inline Tensor model_vjp(const NeuralHssModel& model, const ModelTape& tape, const Tensor& dpred,
                        NeuralHssModel& grad) {
  if (tape.layers.size() != model.layers.size()) throw ShapeError("model_vjp: tape does not match model");
  Tensor g = dpred;
  if (model.project) g = tensor_map_vjp(*model.project, *tape.project, g, *grad.project);
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          auto& gl = std::get<L>(grad.layers[i]);
          if constexpr (std::is_same_v<L, HssLinearLayer>) {
            g = hss_layer_vjp(l, std::get<HssLayerTape>(tape.layers[i]), g, gl);
          } else if constexpr (std::is_same_v<L, NdHssLayer>) {
            g = nd_hss_vjp(l, std::get<NdHssTape>(tape.layers[i]), g, gl);
          } else {
            g = dense_layer_vjp(l, std::get<DenseLayerTape>(tape.layers[i]), g, gl);
          }
        },
        model.layers[i]);
  }
  if (model.lift) g = tensor_map_vjp(*model.lift, *tape.lift, g, *grad.lift);
  return g.reshaped(tape.in_shape);
}

/// Stack of `depth` 1D HSS layers on a d-point grid. The last layer's
/// activation is off so outputs are unconstrained.
inline NeuralHssModel make_hss_model(std::size_t d, std::size_t levels, std::size_t rank, std::size_t depth,
                                     std::uint64_t seed, double scale = 1.0) {
  if (depth == 0) throw ConfigError("model: depth must be >= 1");
  NeuralHssModel m;
  m.seed = seed;
  m.init_scale = scale;
  ClusterTree tree(d, levels);
  for (std::size_t i = 0; i < depth; ++i) {
    HssLinearLayer l{hss_random(tree, rank, derive_seed(seed, 1, i), scale), 1.0, i + 1 < depth};
    m.layers.emplace_back(std::move(l));
  }
  return m;
}

/// Stack of m-dimensional HSS layers (shared extent d per mode).
inline NeuralHssModel make_nd_hss_model(std::size_t modes, std::size_t d, std::size_t levels, std::size_t rank,
                                        std::size_t outer_rank, std::size_t depth, std::uint64_t seed,
                                        double scale = 1.0) {
  if (depth == 0) throw ConfigError("model: depth must be >= 1");
  NeuralHssModel m;
  m.seed = seed;
  m.init_scale = scale;
  for (std::size_t i = 0; i < depth; ++i) {
    NdHssLayer l = make_nd_hss_layer(modes, d, levels, rank, outer_rank, derive_seed(seed, 2, i), scale);
    l.use_activation = i + 1 < depth;
    m.layers.emplace_back(std::move(l));
  }
  return m;
}

/// Dense MLP d -> w -> ... -> w -> d with `depth` layers.
inline NeuralHssModel make_dense_model(std::size_t d, std::size_t width, std::size_t depth, std::uint64_t seed,
                                       double scale = 1.0) {
  if (depth == 0) throw ConfigError("model: depth must be >= 1");
  NeuralHssModel m;
  m.seed = seed;
  m.init_scale = scale;
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t in = i == 0 ? d : width;
    const std::size_t out = i + 1 == depth ? d : width;
    DenseLayer l = make_dense_layer(out, in, derive_seed(seed, 3, i), scale);
    l.use_activation = i + 1 < depth;
    m.layers.emplace_back(std::move(l));
  }
  return m;
}

inline std::size_t dense_model_param_count(std::size_t d, std::size_t width, std::size_t depth) {
  if (depth == 1) return d * d + 1;
  return 2 * d * width + (depth - 2) * width * width + depth;
}

/// Width whose dense_model_param_count is closest to `budget`.
inline std::size_t dense_width_for_budget(std::size_t d, std::size_t depth, std::size_t budget) {
  std::size_t best = 1;
  double best_gap = 1e300;
  for (std::size_t w = 1; w <= 4 * d; ++w) {
    const double gap = std::abs(double(dense_model_param_count(d, w, depth)) - double(budget));
    if (gap < best_gap) best_gap = gap, best = w;
  }
  return best;
}

}  // namespace nhss
