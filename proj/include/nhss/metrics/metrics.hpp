#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nhss/core/error.hpp"
#include "nhss/neural/model.hpp"

namespace nhss {

struct EvalReport {
  std::string metric;
  std::vector<double> values;
  double mean = 0;

  std::size_t count() const { return values.size(); }
};

namespace detail {

inline EvalReport finish_report(std::string name, std::vector<double> values) {
  double s = 0;
  for (double v : values) s += v;
  const double mean = values.empty() ? 0.0 : s / static_cast<double>(values.size());
  return {std::move(name), std::move(values), mean};
}

inline void require_same_shape(const Tensor& pred, const Tensor& target, const char* what) {
  if (pred.shape() != target.shape())
    throw ShapeError(std::string(what) + ": pred " + shape_str(pred.shape()) + " vs target " +
                     shape_str(target.shape()));
}

}  // namespace detail

/// Per-sample ||pred_b - target_b|| / ||target_b||.
inline EvalReport relative_l2_report(const Tensor& pred, const Tensor& target) {
  detail::require_same_shape(pred, target, "relative_l2");
  std::vector<double> v(pred.batch());
  for (std::size_t b = 0; b < v.size(); ++b) {
    const auto p = pred.sample(b), t = target.sample(b);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      num += (p[i] - t[i]) * (p[i] - t[i]);
      den += t[i] * t[i];
    }
    if (den == 0) throw ComputeError("relative_l2: target sample " + std::to_string(b) + " has zero norm");
    v[b] = std::sqrt(num) / std::sqrt(den);
  }
  return detail::finish_report("relative_l2", std::move(v));
}

inline double relative_l2(const Tensor& pred, const Tensor& target) { return relative_l2_report(pred, target).mean; }

/// Per-trajectory unweighted l2 norm of the error over all times and grid points.
inline EvalReport trajectory_l2_report(const Tensor& pred, const Tensor& target) {
  detail::require_same_shape(pred, target, "trajectory_l2");
  if (pred.rank() < 3) throw ShapeError("trajectory_l2: expected (N, T, grid...) tensors");
  std::vector<double> v(pred.batch());
  for (std::size_t b = 0; b < v.size(); ++b) {
    const auto p = pred.sample(b), t = target.sample(b);
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
    v[b] = std::sqrt(s);
  }
  return detail::finish_report("trajectory_l2", std::move(v));
}

inline double trajectory_l2(const Tensor& pred, const Tensor& target) {
  return trajectory_l2_report(pred, target).mean;
}

/// Model output in physical units: output_scale * model(x / input_scale).
inline Tensor predict(const NeuralHssModel& model, const Tensor& x) {
  if (model.input_scale == 1.0 && model.output_scale == 1.0) return model_forward(model, x);
  Tensor xs = x;
  xs *= 1.0 / model.input_scale;
  Tensor y = model_forward(model, xs);
  y *= model.output_scale;
  return y;
}

/// u_{t+1} = u_t + s * model(u_t) from a batch of initial states (B, grid...).
/// Returns (B, steps + 1, grid...) with state 0 equal to u0.
inline Tensor rollout(const NeuralHssModel& model, const Tensor& u0, std::size_t steps) {
  if (!model.residual_scale) throw ConfigError("rollout: model has no residual_scale");
  const double s = *model.residual_scale;
  const std::size_t b = u0.batch(), m = u0.sample_size();
  Shape out_shape = u0.shape();
  out_shape.insert(out_shape.begin() + 1, steps + 1);
  Tensor out(out_shape);
  Tensor u = u0;
  auto store = [&](std::size_t t) {
    for (std::size_t i = 0; i < b; ++i) std::copy_n(u.sample(i).data(), m, out.data().data() + (i * (steps + 1) + t) * m);
  };
  store(0);
  for (std::size_t t = 1; t <= steps; ++t) {
    const Tensor du = predict(model, u);
    if (du.shape() != u.shape()) throw ShapeError("rollout: model output " + shape_str(du.shape()) + " vs state " + shape_str(u.shape()));
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += s * du[i];
    store(t);
  }
  return out;
}

/// CSV rows (sample_index, value) followed by a "mean" line.
inline void write_eval_csv(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f.precision(17);
  f << "sample_index," << r.metric << '\n';
  for (std::size_t i = 0; i < r.values.size(); ++i) f << i << ',' << r.values[i] << '\n';
  f << "mean," << r.mean << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace nhss
