#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "nhss/metrics/metrics.hpp"
#include "nhss/optim/fit.hpp"
#include "nhss/pdegen/dataset.hpp"

namespace nhss {

/// Architecture settings shared by train, data-efficiency and recovery.
struct ModelConfig {
  std::string kind = "hss";  // "hss", "nd_hss" or "dense"
  std::size_t levels = 3;
  std::size_t rank = 2;
  std::size_t depth = 3;
  std::size_t outer_rank = 1;  // nd_hss only
  std::size_t width = 0;       // dense only; 0 matches the hss parameter count
  // Unset means gain-matched for HSS factors and 1 for dense layers.
  std::optional<double> init_scale;
  bool last_activation = false;  // keep the activation on the final layer

  void validate() const {
    if (kind != "hss" && kind != "nd_hss" && kind != "dense")
      throw ConfigError("model: kind must be 'hss', 'nd_hss' or 'dense', got '" + kind + "'");
    if (depth == 0) throw ConfigError("model: depth must be >= 1");
    if (rank == 0) throw ConfigError("model: rank must be >= 1");
    if (outer_rank == 0) throw ConfigError("model: outer_rank must be >= 1");
    if (init_scale && !(*init_scale > 0)) throw ConfigError("model: init_scale must be positive");
  }
};

inline double resolved_init_scale(const ModelConfig& cfg, std::size_t d) {
  if (cfg.init_scale) return *cfg.init_scale;
  return cfg.kind == "dense" ? 1.0 : hss_gain_matched_scale(ClusterTree(d, cfg.levels), cfg.rank);
}

inline void set_last_activation(NeuralHssModel& m, bool on) {
  std::visit([&](auto& l) { l.use_activation = on; }, m.layers.back());
}

/// Parameter count of the HSS model `cfg` describes on a d-point grid,
/// used to size a budget-matched dense baseline.
inline std::size_t hss_budget(const ModelConfig& cfg, std::size_t d) {
  ModelConfig h = cfg;
  h.kind = "hss";
  return param_count(make_hss_model(d, h.levels, h.rank, h.depth, 0));
}

/// Builds the model for samples of shape `sample` (grid extents).
inline NeuralHssModel build_model(const ModelConfig& cfg, const Shape& sample, std::uint64_t seed) {
  cfg.validate();
  if (sample.empty()) throw ShapeError("model: empty sample shape");
  const std::size_t d = sample[0];
  for (std::size_t e : sample)
    if (e != d) throw ShapeError("model: every grid mode must have the same extent, got " + shape_str(sample));
  const double scale = resolved_init_scale(cfg, d);
  NeuralHssModel m;
  if (cfg.kind == "hss") {
    if (sample.size() != 1) throw ShapeError("model: kind 'hss' needs 1D samples, got " + shape_str(sample));
    m = make_hss_model(d, cfg.levels, cfg.rank, cfg.depth, seed, scale);
  } else if (cfg.kind == "nd_hss") {
    m = make_nd_hss_model(sample.size(), d, cfg.levels, cfg.rank, cfg.outer_rank, cfg.depth, seed, scale);
  } else {
    if (sample.size() != 1) throw ShapeError("model: kind 'dense' needs 1D samples, got " + shape_str(sample));
    const std::size_t w = cfg.width ? cfg.width : dense_width_for_budget(d, cfg.depth, hss_budget(cfg, d));
    m = make_dense_model(d, w, cfg.depth, seed, scale);
  }
  if (cfg.last_activation) set_last_activation(m, true);
  return m;
}

/// Steady problems: inputs and targets are divided by their training-set
/// maxima, which are stored in the model so predict() returns physical units.
inline TrainReport train_pairs(NeuralHssModel& model, const Dataset& train, const TrainConfig& cfg, bool max_scaling,
                               const FitHooks& hooks = {}) {
  train.validate();
  Tensor x = train.inputs, y = train.targets;
  model.input_scale = 1.0;
  model.output_scale = 1.0;
  if (max_scaling) {
    const double sx = x.max_abs(), sy = y.max_abs();
    if (!(sx > 0) || !(sy > 0)) throw ComputeError("train: all-zero inputs or targets cannot be max-scaled");
    x *= 1.0 / sx;
    y *= 1.0 / sy;
    model.input_scale = sx;
    model.output_scale = sy;
  }
  return fit(model, x, y, cfg, hooks);
}

/// Residual protocol for time-dependent data: the model maps u_t to
/// (u_{t+dt} - u_t) / s with s the largest training residual, frozen into
/// the model as residual_scale.
inline TrainReport train_residual(NeuralHssModel& model, const TrajectoryDataset& train, const TrainConfig& cfg,
                                  const FitHooks& hooks = {}) {
  const Dataset pairs = step_pairs(train);
  Tensor du = pairs.targets;
  for (std::size_t i = 0; i < du.size(); ++i) du[i] -= pairs.inputs[i];
  const double s = du.max_abs();
  if (!(s > 0)) throw ComputeError("train: training trajectories are constant; residual scale is zero");
  du *= 1.0 / s;
  model.residual_scale = s;
  model.input_scale = 1.0;
  model.output_scale = 1.0;
  return fit(model, pairs.inputs, du, cfg, hooks);
}

/// Initial states (N, grid...) of a trajectory set.
inline Tensor initial_states(const TrajectoryDataset& ds) {
  Shape s = ds.state_shape();
  s.insert(s.begin(), ds.size());
  Tensor u0(s);
  const std::size_t m = u0.sample_size();
  for (std::size_t i = 0; i < ds.size(); ++i) std::copy_n(ds.states.sample(i).data(), m, u0.sample(i).data());
  return u0;
}

inline EvalReport evaluate(const NeuralHssModel& model, const Dataset& ds) {
  return relative_l2_report(predict(model, ds.inputs), ds.targets);
}

/// Full rollout from each initial state, compared over all stored steps.
inline EvalReport evaluate(const NeuralHssModel& model, const TrajectoryDataset& ds) {
  return trajectory_l2_report(rollout(model, initial_states(ds), ds.steps() - 1), ds.states);
}

}  // namespace nhss
