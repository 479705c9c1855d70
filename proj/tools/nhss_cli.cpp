// nhss_cli: data generation, training, evaluation and the experiment
// sweeps, driven by JSON configs. Run with --help for the subcommands.

#include <cstdint>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nhss/core/parallel.hpp"
#include "nhss/experiments/commands.hpp"

namespace {

// Exit statuses.
constexpr int kOk = 0;
constexpr int kUnexpected = 1;
constexpr int kUsage = 2;
constexpr int kIo = 3;
constexpr int kCompute = 4;

nhss::Json load_json(const std::string& path) {
  try {
    return nhss::Json::parse(nhss::read_text(path));
  } catch (const nhss::Json::parse_error& e) {
    throw nhss::ConfigError("config " + path + ": " + e.what());
  }
}

struct Globals {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::size_t threads = 1;
  bool dump = false;
};

/// Loads (or defaults) the config, applies flag overrides, then either
/// prints it or runs the command.
template <class T>
int run(const Globals& g, const std::function<void(nhss::RunConfig<T>&)>& override_fields,
        const std::function<nhss::Json(const nhss::RunConfig<T>&)>& cmd) {
  nhss::RunConfig<T> rc;
  if (!g.config.empty()) rc = nhss::parse_run_config<T>(load_json(g.config), g.config);
  if (*g.seed_opt) rc.seed = g.seed;
  if (!g.out.empty()) rc.out = g.out;
  override_fields(rc);
  if (g.dump) {
    std::cout << nhss::to_json(rc).dump(2) << '\n';
    return kOk;
  }
  std::cout << cmd(rc).dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-HSS experiment runner"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON config for the subcommand")->check(CLI::ExistingFile);
  g.seed_opt = app.add_option("--seed", g.seed, "Global seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads for sample-parallel loops")->check(CLI::PositiveNumber);
  app.add_flag("--dump-config", g.dump, "Print the effective config, including defaults, and exit");

  auto* gen = app.add_subcommand("gen", "Generate a dataset");
  std::string equation;
  std::size_t samples = 0;
  gen->add_option("--equation", equation, "poisson1d, poisson2d, heat, burgers or recovery");
  gen->add_option("--samples", samples, "Number of samples or trajectories");

  auto* train = app.add_subcommand("train", "Train a model on a dataset");
  std::string dataset, test_dataset, model_dir;
  train->add_option("--dataset", dataset, "Training dataset directory");
  train->add_option("--test-dataset", test_dataset, "Held-out dataset directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a trained model");
  eval->add_option("--model", model_dir, "Model directory");
  eval->add_option("--dataset", dataset, "Dataset directory");

  auto* de = app.add_subcommand("data-efficiency", "Train-size sweep against a dense baseline");
  auto* er = app.add_subcommand("exact-recovery", "Recover a random HSS operator from samples");
  auto* kr = app.add_subcommand("kernel-rank-decay", "epsilon-rank of admissible kernel blocks");
  auto* bm = app.add_subcommand("bench-matvec", "Time HSS and dense matvecs");

  auto* plot = app.add_subcommand("plot", "Render a CSV as an SVG line chart");
  nhss::PlotConfig pc;
  plot->add_option("--input", pc.input, "CSV file");
  plot->add_option("--output", pc.output, "SVG file");
  plot->add_option("-x", pc.x, "x column");
  plot->add_option("-y", pc.y, "y column");
  plot->add_option("--group", pc.group, "Column that splits rows into series");
  plot->add_option("--title", pc.options.title, "Chart title");
  plot->add_flag("--logx", pc.options.logx, "Logarithmic x axis");
  plot->add_flag("--logy", pc.options.logy, "Logarithmic y axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    nhss::set_threads(g.threads);
    if (*gen)
      return run<nhss::GenConfig>(
          g,
          [&](auto& rc) {
            if (!equation.empty()) rc.cmd.equation = equation;
            if (samples) rc.cmd.samples = samples;
          },
          nhss::cmd_gen);
    if (*train)
      return run<nhss::TrainCmdConfig>(
          g,
          [&](auto& rc) {
            if (!dataset.empty()) rc.cmd.dataset = dataset;
            if (!test_dataset.empty()) rc.cmd.test_dataset = test_dataset;
          },
          nhss::cmd_train);
    if (*eval)
      return run<nhss::EvalCmdConfig>(
          g,
          [&](auto& rc) {
            if (!model_dir.empty()) rc.cmd.model = model_dir;
            if (!dataset.empty()) rc.cmd.dataset = dataset;
          },
          nhss::cmd_eval);
    auto none = [](auto&) {};
    if (*de) return run<nhss::DataEfficiencyConfig>(g, none, nhss::cmd_data_efficiency);
    if (*er) return run<nhss::ExactRecoveryConfig>(g, none, nhss::cmd_exact_recovery);
    if (*kr) return run<nhss::KernelRankConfig>(g, none, nhss::cmd_kernel_rank_decay);
    if (*bm) return run<nhss::BenchConfig>(g, none, nhss::cmd_bench_matvec);
    if (*plot) {
      nhss::PlotConfig c;
      if (!g.config.empty()) {
        const nhss::Json j = load_json(g.config);
        nhss::JsonReader r(j, g.config);
        nhss::read(r, c);
        r.finish();
      }
      // Flags given on the command line win over the config file.
      if (plot->count("--input")) c.input = pc.input;
      if (plot->count("--output")) c.output = pc.output;
      if (plot->count("-x")) c.x = pc.x;
      if (plot->count("-y")) c.y = pc.y;
      if (plot->count("--group")) c.group = pc.group;
      if (plot->count("--title")) c.options.title = pc.options.title;
      if (plot->count("--logx")) c.options.logx = true;
      if (plot->count("--logy")) c.options.logy = true;
      if (g.dump) {
        std::cout << nhss::to_json(c).dump(2) << '\n';
        return kOk;
      }
      std::cout << nhss::cmd_plot(c).dump(2) << '\n';
      return kOk;
    }
  } catch (const nhss::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const nhss::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const nhss::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kCompute;
  } catch (const nhss::ComputeError& e) {
    std::cerr << "compute error: " << e.what() << '\n';
    return kCompute;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnexpected;
  }
  return kUnexpected;
}
