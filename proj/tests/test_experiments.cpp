#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include "nhss/experiments/commands.hpp"

using namespace nhss;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nhss_exp_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_text(p); }

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

/// One activation-free HSS layer whose weight is the identity.
NeuralHssModel identity_model(std::size_t d) {
  HssMatrix h(ClusterTree(d, 1), 1);
  for (auto& D : h.levels()[0].D) D.setIdentity();
  NeuralHssModel m;
  m.layers.emplace_back(HssLinearLayer{h, 1.0, false});
  return m;
}

}  // namespace

// ------------------------------------------------------------------ stats

TEST(Stats, LineFitRecoversExactLine) {
  const std::vector<double> x = {0, 1, 2, 3}, y = {1, 3, 5, 7};
  const LineFit f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 2, 1e-14);
  EXPECT_NEAR(f.intercept, 1, 1e-14);
  EXPECT_NEAR(f.r2, 1, 1e-14);
}

TEST(Stats, LineFitR2MatchesHandComputation) {
  // y = (0, 2, 1): slope 0.5, intercept 0.5, residuals (-0.5, 1, -0.5),
  // ss_res = 1.5, ss_tot = 2, r2 = 0.25.
  const LineFit f = fit_line(std::vector<double>{0, 1, 2}, std::vector<double>{0, 2, 1});
  EXPECT_NEAR(f.slope, 0.5, 1e-14);
  EXPECT_NEAR(f.r2, 0.25, 1e-14);
}

TEST(Stats, ConstantDataHasPerfectFit) {
  EXPECT_EQ(fit_line(std::vector<double>{1, 2, 3}, std::vector<double>{4, 4, 4}).r2, 1.0);
}

TEST(Stats, PowerLawExponent) {
  std::vector<double> x, y;
  for (double v : {2.0, 8.0, 32.0, 128.0}) x.push_back(v), y.push_back(3 * std::pow(v, 1.5));
  EXPECT_NEAR(fit_power_law(x, y).slope, 1.5, 1e-12);
  EXPECT_THROW(fit_power_law(std::vector<double>{1, 2}, std::vector<double>{1, 0}), ConfigError);
}

TEST(Stats, Median) {
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median({}), ConfigError);
}

// --------------------------------------------------------------- kernel rank

TEST(KernelRank, TouchingClustersAreNotAdmissible) {
  const ClusterTree t(512, 4);
  EXPECT_FALSE(admissible(t.node(4, 0), t.node(4, 1), 512, 1.0));
  EXPECT_FALSE(admissible(t.node(4, 3), t.node(4, 3), 512, 1.0));
  EXPECT_TRUE(admissible(t.node(4, 0), t.node(4, 2), 512, 1.0));
  // Gap of one cluster width: admissible at eta = 1, not at eta = 0.5.
  EXPECT_FALSE(admissible(t.node(4, 0), t.node(4, 2), 512, 0.5));
  EXPECT_DOUBLE_EQ(cluster_distance(t.node(4, 0), t.node(4, 2), 512), 32.0 / 512);
}

TEST(KernelRank, NoReportedBlockTouches) {
  const auto rep = kernel_rank_decay({});
  ASSERT_FALSE(rep.blocks.empty());
  for (const auto& b : rep.blocks) {
    EXPECT_GT(cluster_distance(b.rows, b.cols, 512), 0);
    EXPECT_LE(cluster_diameter(b.rows, 512), cluster_distance(b.rows, b.cols, 512));
  }
}

TEST(KernelRank, BlockMatchesFineMidpointQuadrature) {
  // Independent oracle: composite midpoint rule with 64 x 64 points per
  // cell pair, scaled by the basis normalization n.
  const std::size_t n = 64;
  const Interval a{0, 8}, b{24, 32};
  const auto k = kernel_function("log");
  const DenseMatrix m = kernel_block(k, n, a, b);
  const double h = 1.0 / n;
  const int q = 64;
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      double s = 0;
      for (int p = 0; p < q; ++p)
        for (int r = 0; r < q; ++r) {
          const double x = (double(a.lo + i) + (p + 0.5) / q) * h, y = (double(b.lo + j) + (r + 0.5) / q) * h;
          s += std::log(std::abs(x - y));
        }
      const double oracle = s * h * h / (q * q) * double(n);
      worst = std::max(worst, std::abs(m(Eigen::Index(i), Eigen::Index(j)) - oracle) / std::abs(oracle));
    }
  EXPECT_LE(worst, 1e-6);
}

TEST(KernelRank, RanksAreMonotoneInTolerance) {
  const auto rep = kernel_rank_decay({});
  for (const auto& b : rep.blocks)
    for (std::size_t k = 1; k < b.ranks.size(); ++k) EXPECT_GE(b.ranks[k], b.ranks[k - 1]);
}

TEST(KernelRank, InverseKernelGrowsLogLinearly) {
  KernelRankConfig c;
  c.kernel = "inverse";
  const auto rep = kernel_rank_decay(c);
  EXPECT_GE(rep.mean_r2, 0.9);
  for (const auto& b : rep.blocks) EXPECT_LE(b.ranks.back(), 4 * b.ranks.front());
}

TEST(KernelRank, RejectsBadConfig) {
  KernelRankConfig c;
  c.kernel = "gauss";
  EXPECT_THROW(kernel_rank_decay(c), ConfigError);
  c = {};
  c.eps = {1e-2};
  EXPECT_THROW(kernel_rank_decay(c), ConfigError);
}

// ------------------------------------------------------------------ bench

TEST(Bench, CsvSchemaAndRecords) {
  BenchConfig c;
  c.sizes = {64, 128, 256};
  c.rank = 2;
  const BenchReport r = bench_matvec(c, 1);
  ASSERT_EQ(r.records.size(), 6u);
  const fs::path p = scratch("bench.csv");
  write_bench_csv(r, p);
  const CsvTable t = read_csv(p);
  EXPECT_EQ(t.header, (std::vector<std::string>{"d", "structure", "median_ns", "reps"}));
  EXPECT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(t.rows[0][1], "hss");
  EXPECT_EQ(t.rows[1][1], "dense");
  EXPECT_EQ(t.rows[0][3], "20");
}

TEST(Bench, ParameterCountIsNearLinear) {
  BenchConfig c;
  c.sizes = {64, 128, 256, 512};
  c.rank = 2;
  c.dense = false;
  EXPECT_LE(bench_matvec(c, 1).hss_params.slope, 1.1);
}

TEST(Bench, RejectsSizesWithoutExactLeaves) {
  BenchConfig c;
  c.sizes = {96, 200};
  EXPECT_THROW(bench_matvec(c, 1), ConfigError);
  c = {};
  c.reps = 5;
  EXPECT_THROW(c.validate(), ConfigError);
}

// ------------------------------------------------------------------- plot

TEST(Plot, EmptySeriesIsAnError) {
  EXPECT_THROW(render_svg({PlotSeries{"a", {}, {}}}), ConfigError);
  EXPECT_THROW(render_svg({}), ConfigError);
}

TEST(Plot, TwoPointSeriesHasExactlyOnePolyline) {
  const std::string svg = render_svg({PlotSeries{"a", {1, 2}, {3, 4}}});
  EXPECT_EQ(count(svg, "<polyline"), 1u);
  EXPECT_EQ(count(svg, "<circle"), 2u);
}

TEST(Plot, RenderingIsByteIdentical) {
  const std::vector<PlotSeries> s = {{"hss", {10, 100, 1000}, {1e-1, 1e-2, 1e-3}}, {"dense", {10, 100, 1000}, {2e-1, 3e-2, 1e-3}}};
  PlotOptions o;
  o.logx = o.logy = true;
  EXPECT_EQ(render_svg(s, o), render_svg(s, o));
}

TEST(Plot, LogAxisRejectsNonPositive) {
  PlotOptions o;
  o.logy = true;
  EXPECT_THROW(render_svg({PlotSeries{"a", {1, 2}, {0, 1}}}, o), ConfigError);
}

TEST(Plot, CsvGroupsIntoSeries) {
  const CsvTable t = parse_csv("n,model,err\n1,a,0.5\n1,b,0.7\n2,a,0.25\n2,b,0.3\n");
  const auto s = series_from_csv(t, "n", "err", "model");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].name, "a");
  EXPECT_EQ(s[0].y, (std::vector<double>{0.5, 0.25}));
  EXPECT_EQ(s[1].x, (std::vector<double>{1, 2}));
}

TEST(Plot, MalformedCsvIsRejected) {
  EXPECT_THROW(parse_csv("a,b\n1,2,3\n"), IoError);
  EXPECT_THROW(parse_csv(""), IoError);
  const CsvTable t = parse_csv("a,b\n1,x\n");
  EXPECT_THROW(series_from_csv(t, "a", "b"), IoError);
  EXPECT_THROW(series_from_csv(t, "a", "missing"), ConfigError);
}

TEST(Plot, CommandWritesFileAndRejectsEmptyData) {
  const fs::path dir = scratch("plot");
  fs::create_directories(dir);
  write_text(dir / "in.csv", "x,y\n1,2\n3,4\n");
  PlotConfig c;
  c.input = (dir / "in.csv").string();
  c.output = (dir / "out.svg").string();
  cmd_plot(c);
  EXPECT_EQ(count(slurp(dir / "out.svg"), "<polyline"), 1u);
  write_text(dir / "empty.csv", "x,y\n");
  c.input = (dir / "empty.csv").string();
  EXPECT_THROW(cmd_plot(c), ConfigError);
}

// ----------------------------------------------------------------- config

TEST(Config, DefaultsRoundTrip) {
  const Json a = to_json(RunConfig<TrainCmdConfig>{});
  const Json b = to_json(parse_run_config<TrainCmdConfig>(a));
  EXPECT_EQ(a, b);
  const Json g = to_json(RunConfig<GenConfig>{});
  EXPECT_EQ(to_json(parse_run_config<GenConfig>(g)), g);
  const Json d = to_json(RunConfig<DataEfficiencyConfig>{});
  EXPECT_EQ(to_json(parse_run_config<DataEfficiencyConfig>(d)), d);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(parse_run_config<TrainCmdConfig>(Json{{"nope", 1}}), ConfigError);
  try {
    parse_run_config<TrainCmdConfig>(Json{{"train", {{"epoch", 3}}}});
    FAIL() << "nested unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.epoch"), std::string::npos);
  }
}

TEST(Config, PartialFilesKeepDefaults) {
  const auto rc = parse_run_config<TrainCmdConfig>(Json{{"train", {{"epochs", 7}}}, {"seed", 9}});
  EXPECT_EQ(rc.cmd.train.epochs, 7u);
  EXPECT_EQ(rc.cmd.train.batch_size, 256u);
  EXPECT_EQ(rc.seed, 9u);
}

TEST(Config, TypeErrorsNameTheKey) {
  try {
    parse_run_config<GenConfig>(Json{{"samples", "many"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("samples"), std::string::npos);
  }
}

TEST(Config, InitScaleAcceptsNumberOrGainMatched) {
  auto rc = parse_run_config<TrainCmdConfig>(Json{{"model", {{"init_scale", 0.5}}}});
  EXPECT_EQ(rc.cmd.model.init_scale, 0.5);
  rc = parse_run_config<TrainCmdConfig>(Json{{"model", {{"init_scale", "gain_matched"}}}});
  EXPECT_FALSE(rc.cmd.model.init_scale);
  EXPECT_THROW(parse_run_config<TrainCmdConfig>(Json{{"model", {{"init_scale", "big"}}}}), ConfigError);
}

TEST(Config, FingerprintTracksContent) {
  RunConfig<DataEfficiencyConfig> a, b;
  EXPECT_EQ(config_fingerprint(to_json(a)), config_fingerprint(to_json(b)));
  b.cmd.repeats = 5;
  EXPECT_NE(config_fingerprint(to_json(a)), config_fingerprint(to_json(b)));
  EXPECT_EQ(config_fingerprint(to_json(a)).size(), 16u);
}

// --------------------------------------------------------------- pipeline

TEST(Pipeline, DenseBaselineMatchesBudget) {
  ModelConfig c;
  const std::size_t hss = param_count(build_model(c, {256}, 1));
  c.kind = "dense";
  const std::size_t dense = param_count(build_model(c, {256}, 1));
  EXPECT_NEAR(double(dense) / double(hss), 1.0, 0.1);
  EXPECT_NO_THROW(check_budget(hss, dense));
  EXPECT_THROW(check_budget(1000, 1200), ConfigError);
}

TEST(Pipeline, GainMatchedInitIsRecorded) {
  const ModelConfig c;
  const NeuralHssModel m = build_model(c, {256}, 1);
  EXPECT_DOUBLE_EQ(m.init_scale, hss_gain_matched_scale(ClusterTree(256, 3), 2));
  ModelConfig d = c;
  d.kind = "dense";
  EXPECT_EQ(build_model(d, {256}, 1).init_scale, 1.0);
}

TEST(Pipeline, ModelKindMustFitSampleShape) {
  ModelConfig c;
  EXPECT_THROW(build_model(c, {16, 16}, 1), ShapeError);
  c.kind = "nd_hss";
  c.levels = 2;
  EXPECT_EQ(build_model(c, {16, 16}, 1).layers.size(), 3u);
  EXPECT_THROW(build_model(c, {16, 8}, 1), ShapeError);
  c.kind = "cnn";
  EXPECT_THROW(build_model(c, {16}, 1), ConfigError);
}

TEST(Pipeline, ResidualScaleIsLargestTrainingIncrement) {
  const TrajectoryDataset ds = gen_heat_1d(3, 4);
  double s = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t t = 0; t + 1 < ds.steps(); ++t)
      for (std::size_t j = 0; j < 256; ++j) {
        const std::size_t at = (i * ds.steps() + t) * 256 + j;
        s = std::max(s, std::abs(ds.states[at + 256] - ds.states[at]));
      }
  NeuralHssModel m = build_model({}, {256}, 1);
  TrainConfig tc;
  tc.epochs = 1;
  train_residual(m, ds, tc);
  EXPECT_EQ(*m.residual_scale, s);
}

TEST(Pipeline, IdentityPredictorHasZeroError) {
  Dataset ds = gen_poisson_1d(4, 3);
  ds.targets = ds.inputs;
  EXPECT_EQ(evaluate(identity_model(256), ds).mean, 0.0);
}

// --------------------------------------------------------------- commands

TEST(Commands, GenIsReproducible) {
  RunConfig<GenConfig> rc;
  rc.cmd.samples = 100;
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  rc.out = a.string();
  const Json sa = cmd_gen(rc);
  rc.out = b.string();
  const Json sb = cmd_gen(rc);
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa["residual_check"], "pass");
  for (const char* f : {"dataset.json", "inputs.bin", "targets.bin"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Commands, GenHeatShape) {
  RunConfig<GenConfig> rc;
  rc.cmd.equation = "heat";
  rc.cmd.samples = 10;
  rc.out = scratch("gen_heat").string();
  EXPECT_EQ(cmd_gen(rc)["states_shape"], Json({10, 41, 256}));
  EXPECT_EQ(load_trajectories(rc.out).states.shape(), (Shape{10, 41, 256}));
}

TEST(Commands, GenRejectsUnknownEquation) {
  RunConfig<GenConfig> rc;
  rc.cmd.equation = "navier_stokes";
  rc.out = scratch("gen_bad").string();
  EXPECT_THROW(cmd_gen(rc), ConfigError);
  EXPECT_FALSE(fs::exists(rc.out));
}

TEST(Commands, TrainWithZeroLearningRateLeavesParameters) {
  RunConfig<GenConfig> g;
  g.cmd.samples = 20;
  g.out = scratch("lr0_data").string();
  cmd_gen(g);
  RunConfig<TrainCmdConfig> rc;
  rc.seed = 5;
  rc.cmd.dataset = g.out;
  rc.cmd.train.epochs = 3;
  rc.cmd.train.peak_lr = 0;
  rc.cmd.train.min_lr = 0;
  rc.out = scratch("lr0_model").string();
  cmd_train(rc);
  const NeuralHssModel fresh = build_model(rc.cmd.model, {256}, rc.seed);
  const NeuralHssModel trained = load_model(fs::path(rc.out) / "model");
  std::vector<double> a, b;
  for_each_param(fresh, [&](std::span<const double> s, ParamKind) { a.insert(a.end(), s.begin(), s.end()); });
  for_each_param(trained, [&](std::span<const double> s, ParamKind) { b.insert(b.end(), s.begin(), s.end()); });
  EXPECT_EQ(a, b);
  EXPECT_TRUE(fs::exists(fs::path(rc.out) / "train_report.csv"));
}

TEST(Commands, TrainRejectsMismatchedModel) {
  RunConfig<GenConfig> g;
  g.cmd.samples = 4;
  g.out = scratch("mismatch_data").string();
  cmd_gen(g);
  RunConfig<TrainCmdConfig> rc;
  rc.cmd.dataset = g.out;
  rc.cmd.model.levels = 9;  // 256 is not divisible into 2^9 leaves of size >= 2
  rc.out = scratch("mismatch_model").string();
  EXPECT_THROW(cmd_train(rc), ConfigError);
}

TEST(Commands, EvalMatchesHandComputedMetricAndIsDeterministic) {
  // Identity model; sample 0 predicts (1, 0, ...) for target (2, 0, ...)
  // (error 1/2), sample 1 predicts (0, 3, ...) for (0, 4, ...) (error 1/4).
  const fs::path dir = scratch("eval");
  Dataset ds{"poisson1d", Tensor({2, 8}), Tensor({2, 8}), unit_grid({8}, {8}), {}};
  ds.inputs[0] = 1, ds.targets[0] = 2;
  ds.inputs[8 + 1] = 3, ds.targets[8 + 1] = 4;
  save_dataset(ds, dir / "data");
  save_model(identity_model(8), dir / "model");
  RunConfig<EvalCmdConfig> rc;
  rc.cmd.model = (dir / "model").string();
  rc.cmd.dataset = (dir / "data").string();
  rc.out = (dir / "a").string();
  const Json s = cmd_eval(rc);
  EXPECT_NEAR(s["mean"].get<double>(), 0.375, 1e-15);
  rc.out = (dir / "b").string();
  cmd_eval(rc);
  EXPECT_EQ(slurp(dir / "a" / "eval.csv"), slurp(dir / "b" / "eval.csv"));
}

TEST(Commands, EvalRolloutOfTrajectories) {
  // A zero model keeps u0 for every step, so the trajectory error is the
  // norm of (u_t - u_0) summed over t.
  const fs::path dir = scratch("eval_traj");
  const TrajectoryDataset ds = gen_heat_1d(2, 8);
  save_dataset(ds, dir / "data");
  NeuralHssModel m = build_model({}, {256}, 1);
  for_each_param(m, [](std::span<double> s, ParamKind k) {
    if (k == ParamKind::Weight) std::fill(s.begin(), s.end(), 0.0);
  });
  m.residual_scale = 1.0;
  save_model(m, dir / "model");
  RunConfig<EvalCmdConfig> rc{1, (dir / "out").string(), {(dir / "model").string(), (dir / "data").string()}};
  const Json s = cmd_eval(rc);
  double oracle = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    double sq = 0;
    for (std::size_t t = 0; t < ds.steps(); ++t)
      for (std::size_t j = 0; j < 256; ++j) {
        const double e = ds.states[(i * ds.steps() + t) * 256 + j] - ds.states[i * ds.steps() * 256 + j];
        sq += e * e;
      }
    oracle += std::sqrt(sq) / 2;
  }
  EXPECT_EQ(s["metric"], "trajectory_l2");
  EXPECT_NEAR(s["mean"].get<double>(), oracle, 1e-12 * oracle);
}

TEST(Commands, MissingArtifactsAreIoErrors) {
  RunConfig<EvalCmdConfig> rc{1, scratch("missing").string(), {"/nonexistent/model", "/nonexistent/data"}};
  EXPECT_THROW(cmd_eval(rc), IoError);
}

TEST(DataEfficiency, CsvHasOneRowPerSizeAndModel) {
  RunConfig<DataEfficiencyConfig> rc;
  rc.cmd.sizes = {4, 8, 16};
  rc.cmd.test_samples = 5;
  rc.cmd.repeats = 2;
  rc.cmd.train.epochs = 2;
  rc.out = scratch("de").string();
  const Json s = cmd_data_efficiency(rc);
  const CsvTable t = read_csv(fs::path(rc.out) / "data_efficiency.csv");
  EXPECT_EQ(t.rows.size(), 3u * 2u);
  EXPECT_EQ(s["points"].size(), 6u);
  EXPECT_EQ(count(slurp(fs::path(rc.out) / "data_efficiency.svg"), "<polyline"), 2u);
  for (const auto& p : s["points"]) EXPECT_EQ(p["errors"].size(), 2u);
}

TEST(DataEfficiency, IsReproducibleExceptTiming) {
  DataEfficiencyConfig c;
  c.sizes = {4, 8};
  c.test_samples = 5;
  c.repeats = 1;
  c.train.epochs = 3;
  const auto [pool, test] = data_efficiency_data(c, 3, nullptr);
  const SweepResult a = data_efficiency(c, pool, test, 3), b = data_efficiency(c, pool, test, 3);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].errors, b.points[i].errors);
}

TEST(DataEfficiency, SweepBeyondDatasetIsAnError) {
  DataEfficiencyConfig c;
  c.sizes = {4, 8};
  const Dataset pool = gen_poisson_1d(5, 1), test = gen_poisson_1d(2, 2);
  EXPECT_THROW(data_efficiency(c, pool, test, 1), ConfigError);
  c.sizes = {8, 4};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ExactRecovery, RecoversOperatorAndControlDoesNot) {
  const ExactRecoveryResult r = exact_recovery({}, 1);
  EXPECT_EQ(r.main.samples, 80u);
  EXPECT_LE(r.main.train_mse, 1e-8);
  EXPECT_LE(r.main.test_error, 1e-3);
  EXPECT_LE(std::abs(r.main.alpha - 1), 1e-3);
  EXPECT_LE(r.main.operator_error, 1e-3);
  ASSERT_TRUE(r.control);
  EXPECT_GE(r.control->test_error, 1e-1);
}

TEST(ExactRecovery, RejectsUnderSizedModelRank) {
  ExactRecoveryConfig c;
  c.model_rank = 1;
  EXPECT_THROW(exact_recovery(c, 1), ConfigError);
  c = {};
  c.train.alpha_penalty = 0;
  EXPECT_THROW(exact_recovery(c, 1), ConfigError);
}
