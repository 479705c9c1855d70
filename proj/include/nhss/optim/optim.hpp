#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nhss/core/error.hpp"
#include "nhss/neural/model.hpp"

namespace nhss {

struct LossValue {
  double value = 0;
  Tensor grad;
};

/// Batch-mean squared l2 error: (1/B) sum_b ||pred_b - target_b||^2.
inline LossValue mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss: pred " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
  const double inv_b = pred.batch() == 0 ? 0.0 : 1.0 / static_cast<double>(pred.batch());
  LossValue out{0.0, Tensor(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    out.value += r * r;
    out.grad[i] = 2.0 * r * inv_b;
  }
  out.value *= inv_b;
  return out;
}

struct PenaltyValue {
  double value = 0;
  std::vector<double> grad;
};

/// lambda/2 * sum_i (alpha_i - 1)^2.
inline PenaltyValue alpha_penalty(std::span<const double> alphas, double lambda) {
  if (!(lambda >= 0)) throw ConfigError("alpha_penalty: lambda must be >= 0");
  PenaltyValue out{0.0, std::vector<double>(alphas.size())};
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const double e = alphas[i] - 1.0;
    out.value += e * e;
    out.grad[i] = lambda * e;
  }
  out.value *= 0.5 * lambda;
  return out;
}

/// Cosine decay from `peak` at step 0 to `min` at `total`, no warmup.
inline double cosine_lr(std::size_t step, std::size_t total, double peak, double min) {
  if (step > total) throw ConfigError("cosine_lr: step " + std::to_string(step) + " > total " + std::to_string(total));
  if (total == 0) return peak;
  if (step == total) return min;
  const double t = static_cast<double>(step) / static_cast<double>(total);
  return min + 0.5 * (peak - min) * (1.0 + std::cos(std::numbers::pi * t));
}

inline double global_norm(const NeuralHssModel& grads) {
  double s = 0;
  for_each_param(grads, [&](std::span<const double> b, ParamKind) {
    for (double v : b) s += v * v;
  });
  return std::sqrt(s);
}

/// Rescales every block so the global l2 norm is at most `max_norm`.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
inline double clip_global_norm(NeuralHssModel& grads, double max_norm) {
  const double g = global_norm(grads);
  if (max_norm > 0 && g > max_norm) {
    const double s = max_norm / g;
    for_each_param(grads, [&](std::span<double> b, ParamKind) {
      for (double& v : b) v *= s;
    });
  }
  return g;
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Decoupled weight decay with bias-corrected moments. Alphas are never decayed.
class AdamW {
 public:
  AdamW(const NeuralHssModel& model, AdamWConfig cfg) : cfg_(cfg) {
    for_each_param(model, [&](std::span<const double> b, ParamKind) {
      m_.emplace_back(b.size(), 0.0);
      v_.emplace_back(b.size(), 0.0);
    });
  }

  std::size_t steps() const { return t_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  void step(NeuralHssModel& params, const NeuralHssModel& grads, double lr) {
    std::vector<std::span<const double>> g;
    for_each_param(grads, [&](std::span<const double> b, ParamKind) { g.push_back(b); });
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t k = 0;
    for_each_param(params, [&](std::span<double> p, ParamKind kind) {
      if (k >= g.size() || g[k].size() != p.size() || m_[k].size() != p.size())
        throw ShapeError("adamw: gradient set does not match parameters");
      const double wd = kind == ParamKind::Alpha ? 0.0 : cfg_.weight_decay;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[k][i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mh = m[i] / c1, vh = v[i] / c2;
        p[i] -= lr * (mh / (std::sqrt(vh) + cfg_.eps) + wd * p[i]);
      }
      ++k;
    });
    if (k != g.size() || k != m_.size()) throw ShapeError("adamw: gradient set does not match parameters");
  }

 private:
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace nhss
