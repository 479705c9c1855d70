#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>

#include "nhss/experiments/config.hpp"
#include "nhss/neural/serialize.hpp"
#include "nhss/pdegen/io.hpp"

namespace nhss {

// Every command writes its artifacts under cfg.out, records a summary in
// <out>/summary.json and returns the same summary.

namespace detail {
inline std::filesystem::path prepare_out(const std::string& out) {
  if (out.empty()) throw ConfigError("'out' must name a directory");
  std::filesystem::create_directories(out);
  return out;
}

inline Json finish_summary(const std::filesystem::path& out, Json s) {
  write_text(out / "summary.json", s.dump(2) + "\n");
  return s;
}

inline Json shape_json(const Tensor& t) { return t.shape(); }
}  // namespace detail

inline Json cmd_gen(const RunConfig<GenConfig>& rc) {
  const GenConfig& c = rc.cmd;
  c.validate();
  const auto out = detail::prepare_out(rc.out);
  Json s = {{"command", "gen"}, {"equation", c.equation}, {"samples", c.samples}, {"seed", rc.seed}};
  if (c.equation == "heat" || c.equation == "burgers") {
    const TrajectoryDataset ds =
        c.equation == "heat" ? gen_heat_1d(c.samples, rc.seed, c.heat) : gen_burgers_1d(c.samples, rc.seed, c.burgers);
    save_dataset(ds, out);
    s["states_shape"] = detail::shape_json(ds.states);
    s["dt"] = ds.dt;
  } else {
    Dataset ds;
    if (c.equation == "poisson1d") ds = gen_poisson_1d(c.samples, rc.seed, c.poisson1d);
    if (c.equation == "poisson2d") ds = gen_poisson_2d(c.samples, rc.seed, c.poisson2d);
    if (c.equation == "recovery")
      ds = gen_hss_recovery_dataset(c.recovery.d, c.recovery.levels, c.recovery.rank, c.samples, rc.seed).data;
    save_dataset(ds, out);
    s["inputs_shape"] = detail::shape_json(ds.inputs);
    s["targets_shape"] = detail::shape_json(ds.targets);
    if (ds.meta.contains("max_relative_residual")) {
      const double r = ds.meta["max_relative_residual"].get<double>();
      s["max_relative_residual"] = r;
      s["residual_check"] = r <= 1e-8 ? "pass" : "fail";
      if (!(r <= 1e-8)) throw ComputeError("gen: discrete residual " + std::to_string(r) + " exceeds 1e-8");
    }
  }
  return detail::finish_summary(out, s);
}

inline Json cmd_train(const RunConfig<TrainCmdConfig>& rc) {
  const TrainCmdConfig& c = rc.cmd;
  c.validate();
  const auto out = detail::prepare_out(rc.out);
  TrainConfig tc = c.train;
  tc.shuffle_seed = rc.seed;
  const bool traj = dataset_kind(c.dataset) == "trajectories";
  auto take = [&](auto ds) { return c.samples && c.samples < ds.size() ? ds.slice(0, c.samples) : ds; };

  FitHooks hooks;
  std::optional<Dataset> test_pairs;
  std::optional<TrajectoryDataset> test_traj;
  if (!c.test_dataset.empty()) {
    if (traj)
      test_traj = load_trajectories(c.test_dataset);
    else
      test_pairs = load_dataset(c.test_dataset);
    hooks.evaluate = [&](const NeuralHssModel& m) {
      return test_traj ? evaluate(m, *test_traj).mean : evaluate(m, *test_pairs).mean;
    };
    if (tc.eval_every == 0) tc.eval_every = tc.epochs;
  }

  NeuralHssModel model;
  TrainReport rep;
  Json s = {{"command", "train"}, {"dataset", c.dataset}, {"seed", rc.seed}};
  if (traj) {
    const TrajectoryDataset ds = take(load_trajectories(c.dataset));
    model = build_model(c.model, ds.state_shape(), rc.seed);
    rep = train_residual(model, ds, tc, hooks);
    s["equation"] = ds.equation;
    s["trajectories"] = ds.size();
    s["residual_scale"] = *model.residual_scale;
  } else {
    const Dataset ds = take(load_dataset(c.dataset));
    model = build_model(c.model, ds.inputs.sample_shape(), rc.seed);
    rep = train_pairs(model, ds, tc, c.max_scaling, hooks);
    s["equation"] = ds.equation;
    s["samples"] = ds.size();
    s["input_scale"] = model.input_scale;
    s["output_scale"] = model.output_scale;
  }
  save_model(model, out / "model");
  write_report_csv(rep, out / "train_report.csv");
  s["params"] = rep.param_count;
  s["steps"] = rep.steps;
  s["final_loss"] = rep.final_loss();
  s["alphas"] = alphas(model);
  s["init_scale"] = model.init_scale;
  if (!rep.eval_metrics().empty()) s["test_metric"] = rep.eval_metrics().back();
  s["seconds"] = rep.total_seconds;
  return detail::finish_summary(out, s);
}

inline Json cmd_eval(const RunConfig<EvalCmdConfig>& rc) {
  const EvalCmdConfig& c = rc.cmd;
  c.validate();
  const auto out = detail::prepare_out(rc.out);
  const NeuralHssModel model = load_model(c.model);
  const EvalReport r = dataset_kind(c.dataset) == "trajectories" ? evaluate(model, load_trajectories(c.dataset))
                                                                 : evaluate(model, load_dataset(c.dataset));
  write_eval_csv(r, out / "eval.csv");
  return detail::finish_summary(
      out, {{"command", "eval"}, {"metric", r.metric}, {"samples", r.count()}, {"mean", r.mean}});
}

inline Json cmd_data_efficiency(const RunConfig<DataEfficiencyConfig>& rc) {
  rc.cmd.validate();
  const auto out = detail::prepare_out(rc.out);
  const auto [pool, test] = data_efficiency_data(rc.cmd, rc.seed, [](const std::string& p) { return load_dataset(p); });
  SweepResult r = data_efficiency(rc.cmd, pool, test, rc.seed);
  r.fingerprint = config_fingerprint(to_json(rc));
  write_sweep_csv(r, out / "data_efficiency.csv");
  PlotOptions po;
  po.title = "Train size vs relative test error";
  po.xlabel = "train size";
  po.ylabel = "relative L2 test error";
  po.logx = po.logy = true;
  write_svg(series_from_csv(read_csv(out / "data_efficiency.csv"), "train_size", "test_error", "model"), po,
            out / "data_efficiency.svg");
  Json pts = Json::array();
  for (const auto& p : r.points)
    pts.push_back({{"train_size", p.train_size},
                   {"model", p.model},
                   {"params", p.params},
                   {"test_error", p.test_error},
                   {"errors", p.errors},
                   {"seconds", p.seconds}});
  return detail::finish_summary(out, {{"command", "data-efficiency"},
                                      {"fingerprint", r.fingerprint},
                                      {"test_samples", test.size()},
                                      {"points", pts}});
}

inline Json recovery_json(const RecoveryRun& r) {
  return {{"samples", r.samples},
          {"train_mse", r.train_mse},
          {"final_loss", r.report.final_loss()},
          {"test_relative_l2", r.test_error},
          {"test_relative_l2_max", r.test_error_max},
          {"operator_error", r.operator_error},
          {"alpha", r.alpha},
          {"alpha_deviation", std::abs(r.alpha - 1)},
          {"seconds", r.report.total_seconds}};
}

inline Json cmd_exact_recovery(const RunConfig<ExactRecoveryConfig>& rc) {
  rc.cmd.validate();
  const auto out = detail::prepare_out(rc.out);
  const ExactRecoveryResult r = exact_recovery(rc.cmd, rc.seed);
  write_report_csv(r.main.report, out / "train_report.csv");
  Json s = {{"command", "exact-recovery"}, {"seed", rc.seed}, {"main", recovery_json(r.main)}};
  if (r.control) {
    write_report_csv(r.control->report, out / "control_report.csv");
    s["control"] = recovery_json(*r.control);
  }
  return detail::finish_summary(out, s);
}

inline Json cmd_kernel_rank_decay(const RunConfig<KernelRankConfig>& rc) {
  const KernelRankConfig& c = rc.cmd;
  const KernelRankReport r = kernel_rank_decay(c);
  const auto out = detail::prepare_out(rc.out);
  {
    std::ofstream f(out / "kernel_rank.csv");
    f.precision(17);
    f << "level,row_lo,row_hi,col_lo,col_hi,eps,rank\n";
    for (const auto& b : r.blocks)
      for (std::size_t k = 0; k < c.eps.size(); ++k)
        f << b.level << ',' << b.rows.lo << ',' << b.rows.hi << ',' << b.cols.lo << ',' << b.cols.hi << ','
          << c.eps[k] << ',' << b.ranks[k] << '\n';
    if (!f) throw IoError("write failed: " + (out / "kernel_rank.csv").string());
  }
  // Mean rank per level against log10(1/eps), for the plot.
  std::map<std::size_t, std::vector<double>> mean;
  std::map<std::size_t, std::size_t> count;
  for (const auto& b : r.blocks) {
    auto& m = mean[b.level];
    m.resize(c.eps.size(), 0.0);
    for (std::size_t k = 0; k < c.eps.size(); ++k) m[k] += double(b.ranks[k]);
    ++count[b.level];
  }
  std::vector<PlotSeries> series;
  for (auto& [level, m] : mean) {
    PlotSeries ps{"level " + std::to_string(level), {}, {}};
    for (std::size_t k = 0; k < c.eps.size(); ++k) {
      ps.x.push_back(std::log10(1.0 / c.eps[k]));
      ps.y.push_back(m[k] / double(count[level]));
    }
    series.push_back(std::move(ps));
  }
  PlotOptions po;
  po.title = "epsilon-rank of admissible blocks (" + c.kernel + " kernel)";
  po.xlabel = "log10(1/eps)";
  po.ylabel = "mean rank";
  write_svg(series, po, out / "kernel_rank.svg");
  std::size_t worst = 0;
  for (const auto& b : r.blocks)
    if (b.ranks.back() > 4 * b.ranks.front()) ++worst;
  return detail::finish_summary(out, {{"command", "kernel-rank-decay"},
                                      {"kernel", c.kernel},
                                      {"blocks", r.blocks.size()},
                                      {"mean_slope", r.mean_slope},
                                      {"mean_r2", r.mean_r2},
                                      {"max_growth", r.max_growth},
                                      {"blocks_over_4x", worst}});
}

inline Json cmd_bench_matvec(const RunConfig<BenchConfig>& rc) {
  const BenchReport r = bench_matvec(rc.cmd, rc.seed);
  const auto out = detail::prepare_out(rc.out);
  write_bench_csv(r, out / "bench_matvec.csv");
  PlotOptions po;
  po.title = "Matvec time";
  po.xlabel = "d";
  po.ylabel = "median ns";
  po.logx = po.logy = true;
  write_svg(series_from_csv(read_csv(out / "bench_matvec.csv"), "d", "median_ns", "structure"), po,
            out / "bench_matvec.svg");
  Json params = Json::array();
  for (const auto& b : r.records)
    if (b.structure == "hss") params.push_back({{"d", b.d}, {"params", b.params}});
  Json s = {{"command", "bench-matvec"},
            {"rank", rc.cmd.rank},
            {"hss_exponent", r.hss_time.slope},
            {"hss_params_exponent", r.hss_params.slope},
            {"hss_params", params}};
  if (rc.cmd.dense) s["dense_exponent"] = r.dense_time.slope;
  return detail::finish_summary(out, s);
}

/// Renders a CSV to SVG. Unlike the other commands it writes only the
/// requested file.
inline Json cmd_plot(const PlotConfig& c) {
  c.validate();
  const auto series = series_from_csv(read_csv(c.input), c.x, c.y, c.group);
  if (series.empty()) throw ConfigError("plot: " + c.input + " has no data rows");
  write_svg(series, c.options, c.output);
  return {{"command", "plot"}, {"output", c.output}, {"series", series.size()}};
}

}  // namespace nhss
