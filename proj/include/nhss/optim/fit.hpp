#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "nhss/core/rng.hpp"
#include "nhss/optim/optim.hpp"

namespace nhss {

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 256;
  double peak_lr = 1e-3;
  double min_lr = 1e-5;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps_adam = 1e-8;
  double grad_clip_norm = 1.0;  // <= 0 disables clipping
  double alpha_penalty = 0.0;
  std::uint64_t shuffle_seed = 0;
  std::size_t eval_every = 0;  // 0 disables periodic evaluation

  void validate() const {
    if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (!(min_lr >= 0) || !(peak_lr >= min_lr))
      throw ConfigError("train: need peak_lr >= min_lr >= 0 (peak_lr=" + std::to_string(peak_lr) +
                        ", min_lr=" + std::to_string(min_lr) + ")");
    if (!(alpha_penalty >= 0)) throw ConfigError("train: alpha_penalty must be >= 0");
    if (!(weight_decay >= 0)) throw ConfigError("train: weight_decay must be >= 0");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("train: betas must lie in [0, 1)");
    if (!(eps_adam > 0)) throw ConfigError("train: eps_adam must be > 0");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // optimizer steps taken so far
  double lr = 0;         // rate used by the last step of the epoch
  double train_loss = 0;
  std::optional<double> eval_metric;
  std::vector<double> alphas;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t param_count = 0;
  std::size_t steps = 0;
  // Wall-clock statistics; excluded from equality.
  double mean_step_seconds = 0;
  double max_step_seconds = 0;
  double total_seconds = 0;

  double final_loss() const { return epochs.empty() ? NAN : epochs.back().train_loss; }
  std::vector<double> losses() const {
    std::vector<double> out;
    for (const auto& e : epochs) out.push_back(e.train_loss);
    return out;
  }
  std::vector<double> eval_metrics() const {
    std::vector<double> out;
    for (const auto& e : epochs)
      if (e.eval_metric) out.push_back(*e.eval_metric);
    return out;
  }

  bool operator==(const TrainReport& o) const {
    return epochs == o.epochs && param_count == o.param_count && steps == o.steps;
  }
};

inline void write_report_csv(const TrainReport& r, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f.precision(17);
  f << "epoch,step,lr,train_loss,eval_metric\n";
  for (const auto& e : r.epochs) {
    f << e.epoch << ',' << e.step << ',' << e.lr << ',' << e.train_loss << ',';
    if (e.eval_metric) f << *e.eval_metric;
    f << '\n';
  }
  if (!f) throw IoError("write failed: " + path.string());
}

struct FitHooks {
  std::function<double(const NeuralHssModel&)> evaluate;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Loss and gradient of mse + alpha penalty on one batch. Gradients
/// overwrite `grad`, which must come from zeros_like(model).
inline double loss_and_grad(const NeuralHssModel& model, const Tensor& x, const Tensor& y, double lambda,
                            NeuralHssModel& grad) {
  for_each_param(grad, [](std::span<double> s, ParamKind) { std::fill(s.begin(), s.end(), 0.0); });
  ModelTape tape;
  const Tensor pred = model_forward(model, x, &tape);
  const LossValue l = mse_loss(pred, y);
  model_vjp(model, tape, l.grad, grad);
  double total = l.value;
  if (lambda > 0) {
    const auto a = alphas(model);
    const auto p = alpha_penalty(a, lambda);
    auto refs = alpha_refs(grad);
    for (std::size_t i = 0; i < refs.size(); ++i) *refs[i] += p.grad[i];
    total += p.value;
  }
  return total;
}

/// Shuffled mini-batch AdamW training with a cosine schedule over all steps
/// and global-norm clipping. Deterministic given the model and config.
inline TrainReport fit(NeuralHssModel& model, const Tensor& inputs, const Tensor& targets, const TrainConfig& cfg,
                       const FitHooks& hooks = {}) {
  cfg.validate();
  const std::size_t n = inputs.batch();
  if (inputs.empty() || n == 0) throw ConfigError("fit: empty dataset");
  if (targets.batch() != n)
    throw ShapeError("fit: " + std::to_string(n) + " inputs vs " + std::to_string(targets.batch()) + " targets");

  const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = per_epoch * cfg.epochs;
  AdamW opt(model, {cfg.beta1, cfg.beta2, cfg.eps_adam, cfg.weight_decay});
  NeuralHssModel grad = zeros_like(model);

  TrainReport report;
  report.param_count = param_count(model);
  std::vector<std::size_t> perm(n);
  const auto t_start = std::chrono::steady_clock::now();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.shuffle_seed, 7, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0;
    for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      const std::span<const std::size_t> idx(perm.data() + lo, hi - lo);
      const auto t0 = std::chrono::steady_clock::now();
      const double loss = loss_and_grad(model, inputs.gather(idx), targets.gather(idx), cfg.alpha_penalty, grad);
      if (!std::isfinite(loss))
        throw ComputeError("fit: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
      clip_global_norm(grad, cfg.grad_clip_norm);
      rec.lr = cosine_lr(step, total, cfg.peak_lr, cfg.min_lr);
      opt.step(model, grad, rec.lr);
      ++step;
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report.mean_step_seconds += dt;
      report.max_step_seconds = std::max(report.max_step_seconds, dt);
      loss_sum += loss * static_cast<double>(hi - lo);
    }
    rec.step = step;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.alphas = alphas(model);
    if (hooks.evaluate && cfg.eval_every > 0 && ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs))
      rec.eval_metric = hooks.evaluate(model);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    report.epochs.push_back(std::move(rec));
  }
  report.steps = step;
  report.mean_step_seconds /= static_cast<double>(std::max<std::size_t>(step, 1));
  report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace nhss
