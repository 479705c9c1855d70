#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <fstream>
#include <string>
#include <vector>

#include "nhss/experiments/pipeline.hpp"
#include "nhss/pdegen/poisson.hpp"
#include "nhss/pdegen/recovery.hpp"

namespace nhss {

// ------------------------------------------------------------ data efficiency

struct DataEfficiencyConfig {
  std::vector<std::size_t> sizes = {10, 32, 100, 316, 1000};
  std::size_t test_samples = 200;
  std::size_t repeats = 3;  // fresh model seeds per point; the error is their mean
  bool baseline = true;
  std::string dataset;  // optional on-disk 1D Poisson dataset; generated when empty
  Poisson1dOptions poisson;
  ModelConfig model;
  TrainConfig train;

  void validate() const {
    if (sizes.empty()) throw ConfigError("data-efficiency: sizes is empty");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] == 0) throw ConfigError("data-efficiency: train sizes must be >= 1");
      if (i && sizes[i] <= sizes[i - 1]) throw ConfigError("data-efficiency: sizes must be strictly increasing");
    }
    if (test_samples == 0) throw ConfigError("data-efficiency: test_samples must be >= 1");
    if (repeats == 0) throw ConfigError("data-efficiency: repeats must be >= 1");
    if (model.kind != "hss") throw ConfigError("data-efficiency: model.kind must be 'hss'");
    model.validate();
    train.validate();
  }
};

struct SweepPoint {
  std::size_t train_size = 0;
  std::string model;  // "neural_hss" or "dense"
  std::size_t params = 0;
  std::vector<double> errors;  // one per repeat
  double test_error = 0;       // mean of errors
  double train_loss = 0;       // mean final training loss
  double seconds = 0;          // total training time over repeats
};

struct SweepResult {
  std::vector<SweepPoint> points;  // ordered by train size, then model
  std::string fingerprint;

  std::vector<double> errors(const std::string& model) const {
    std::vector<double> out;
    for (const auto& p : points)
      if (p.model == model) out.push_back(p.test_error);
    return out;
  }
};

/// Dense baselines must carry the HSS parameter count to within 10%.
inline void check_budget(std::size_t hss_params, std::size_t dense_params) {
  const double ratio = double(dense_params) / double(hss_params);
  if (ratio < 0.9 || ratio > 1.1)
    throw ConfigError("data-efficiency: dense baseline has " + std::to_string(dense_params) + " parameters vs " +
                      std::to_string(hss_params) + " for Neural-HSS (outside +-10%)");
}

/// Train Neural-HSS (and the budget-matched dense MLP) on the first N pairs
/// of a fixed pool for each N, and evaluate on a fixed held-out set.
inline SweepResult data_efficiency(const DataEfficiencyConfig& cfg, const Dataset& pool, const Dataset& test,
                                   std::uint64_t seed) {
  cfg.validate();
  if (cfg.sizes.back() > pool.size())
    throw ConfigError("data-efficiency: sweep needs " + std::to_string(cfg.sizes.back()) + " training samples, dataset has " +
                      std::to_string(pool.size()));
  if (pool.inputs.rank() != 2) throw ShapeError("data-efficiency: expects 1D samples");
  const Shape sample = pool.inputs.sample_shape();
  ModelConfig dense_cfg = cfg.model;
  dense_cfg.kind = "dense";
  dense_cfg.init_scale.reset();

  std::vector<std::string> kinds = {"neural_hss"};
  if (cfg.baseline) kinds.push_back("dense");
  SweepResult res;
  for (std::size_t p = 0; p < cfg.sizes.size(); ++p) {
    const Dataset train = pool.slice(0, cfg.sizes[p]);
    for (const auto& kind : kinds) {
      SweepPoint pt{cfg.sizes[p], kind, 0, {}, 0, 0, 0};
      for (std::size_t r = 0; r < cfg.repeats; ++r) {
        const std::uint64_t s = derive_seed(seed, 301, p * cfg.repeats + r);
        NeuralHssModel m = build_model(kind == "dense" ? dense_cfg : cfg.model, sample, s);
        pt.params = param_count(m);
        if (kind == "dense") check_budget(hss_budget(cfg.model, sample[0]), pt.params);
        TrainConfig tc = cfg.train;
        tc.shuffle_seed = s;
        const TrainReport rep = train_pairs(m, train, tc, true);
        pt.errors.push_back(evaluate(m, test).mean);
        pt.train_loss += rep.final_loss() / double(cfg.repeats);
        pt.seconds += rep.total_seconds;
      }
      for (double e : pt.errors) pt.test_error += e / double(cfg.repeats);
      res.points.push_back(std::move(pt));
    }
  }
  return res;
}

/// Generates the pool and held-out set from `seed` (or loads the pool from
/// cfg.dataset, taking the held-out set from its tail).
inline std::pair<Dataset, Dataset> data_efficiency_data(const DataEfficiencyConfig& cfg, std::uint64_t seed,
                                                        const std::function<Dataset(const std::string&)>& load) {
  if (!cfg.dataset.empty()) {
    const Dataset all = load(cfg.dataset);
    if (all.equation != "poisson1d") throw ConfigError("data-efficiency: dataset is '" + all.equation + "', need poisson1d");
    const std::size_t need = cfg.sizes.back() + cfg.test_samples;
    if (all.size() < need)
      throw ConfigError("data-efficiency: dataset has " + std::to_string(all.size()) + " samples, sweep and test need " +
                        std::to_string(need));
    return {all.slice(0, cfg.sizes.back()), all.slice(all.size() - cfg.test_samples, all.size())};
  }
  return {gen_poisson_1d(cfg.sizes.back(), derive_seed(seed, 302, 0), cfg.poisson),
          gen_poisson_1d(cfg.test_samples, derive_seed(seed, 303, 0), cfg.poisson)};
}

inline void write_sweep_csv(const SweepResult& r, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f.precision(17);
  f << "train_size,model,params,test_error,test_error_min,test_error_max,train_loss,seconds\n";
  for (const auto& p : r.points) {
    const auto [lo, hi] = std::minmax_element(p.errors.begin(), p.errors.end());
    f << p.train_size << ',' << p.model << ',' << p.params << ',' << p.test_error << ',' << *lo << ',' << *hi << ','
      << p.train_loss << ',' << p.seconds << '\n';
  }
  if (!f) throw IoError("write failed: " + path.string());
}

// -------------------------------------------------------------- exact recovery

struct ExactRecoveryConfig {
  std::size_t d = 32;
  std::size_t levels = 2;
  std::size_t rank = 2;        // rank of the ground-truth operator
  std::size_t model_rank = 0;  // 0 uses `rank`
  std::size_t train_samples = 0;  // 0 uses 20 * rank * levels
  std::size_t control_samples = 2;
  std::size_t test_samples = 200;
  double alpha_init = 0.5;
  double init_scale = 1.0;
  TrainConfig train = [] {
    TrainConfig t;
    t.epochs = 4000;
    t.batch_size = 20;
    t.peak_lr = 1e-2;
    t.min_lr = 1e-7;
    t.weight_decay = 0;
    t.grad_clip_norm = 1;
    t.alpha_penalty = 1;
    return t;
  }();

  std::size_t resolved_train_samples() const { return train_samples ? train_samples : 20 * rank * levels; }
  std::size_t resolved_model_rank() const { return model_rank ? model_rank : rank; }

  void validate() const {
    ClusterTree tree(d, levels);
    if (rank == 0 || tree.leaf_size() < resolved_model_rank() || resolved_model_rank() < rank)
      throw ConfigError("exact-recovery: need 1 <= rank <= model_rank <= leaf size");
    if (test_samples == 0) throw ConfigError("exact-recovery: test_samples must be >= 1");
    if (!(train.alpha_penalty > 0)) throw ConfigError("exact-recovery: train.alpha_penalty must be > 0");
    if (!(init_scale > 0)) throw ConfigError("exact-recovery: init_scale must be positive");
    train.validate();
  }
};

struct RecoveryRun {
  std::size_t samples = 0;
  double train_mse = 0;       // data term only, full training set
  double test_error = 0;      // mean relative L2 over the held-out batch
  double test_error_max = 0;  // worst held-out sample
  double operator_error = 0;  // ||alpha-adjusted learned matrix - truth||_F / ||truth||_F
  double alpha = 0;
  TrainReport report;
};

struct ExactRecoveryResult {
  RecoveryRun main;
  std::optional<RecoveryRun> control;
};

inline RecoveryRun recovery_run(const ExactRecoveryConfig& cfg, const RecoveryDataset& data, std::size_t n,
                                std::uint64_t seed) {
  const Dataset train = data.data.slice(0, n);
  const Dataset test = data.data.slice(data.data.size() - cfg.test_samples, data.data.size());
  NeuralHssModel m = make_hss_model(cfg.d, cfg.levels, cfg.resolved_model_rank(), 1, seed, cfg.init_scale);
  auto& layer = std::get<HssLinearLayer>(m.layers[0]);
  layer.use_activation = true;
  layer.alpha = cfg.alpha_init;
  TrainConfig tc = cfg.train;
  tc.shuffle_seed = seed;
  RecoveryRun run;
  run.samples = n;
  run.report = fit(m, train.inputs, train.targets, tc);
  run.train_mse = mse_loss(model_forward(m, train.inputs), train.targets).value;
  const EvalReport ev = evaluate(m, test);
  run.test_error = ev.mean;
  run.test_error_max = *std::max_element(ev.values.begin(), ev.values.end());
  run.alpha = layer.alpha;
  const DenseMatrix truth = hss_to_dense(data.truth);
  run.operator_error = (hss_to_dense(layer.weight) - truth).norm() / truth.norm();
  return run;
}

/// Fits a single activated HSS layer with the alpha penalty to data from a
/// random HSS operator, at the configured sample count and at the
/// under-sampled control count (skipped when control_samples is 0).
inline ExactRecoveryResult exact_recovery(const ExactRecoveryConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = std::max(cfg.resolved_train_samples(), cfg.control_samples);
  const RecoveryDataset data = gen_hss_recovery_dataset(cfg.d, cfg.levels, cfg.rank, n + cfg.test_samples, seed);
  ExactRecoveryResult res;
  res.main = recovery_run(cfg, data, cfg.resolved_train_samples(), derive_seed(seed, 311, 0));
  if (cfg.control_samples > 0) res.control = recovery_run(cfg, data, cfg.control_samples, derive_seed(seed, 311, 1));
  return res;
}

}  // namespace nhss
