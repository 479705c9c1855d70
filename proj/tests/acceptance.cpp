// Acceptance run: one PASS/FAIL line per criterion, artifacts under --out.
// Exit status is 0 only when every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grad_check.hpp"
#include "nhss/experiments/commands.hpp"
#include "nhss/hss/compress.hpp"

using namespace nhss;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Runner {
  fs::path out;
  std::vector<std::pair<std::string, bool>> results;
  Json record = Json::object();

  void run(int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < limit_seconds;
    const bool pass = o.pass && in_time;
    std::printf("%s %d %s: %s; runtime %.1f s (limit %.0f s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                o.detail.c_str(), secs, limit_seconds);
    std::fflush(stdout);
    results.emplace_back(name, pass);
    record[std::to_string(id)] = {{"name", name}, {"pass", pass}, {"detail", o.detail}, {"seconds", secs}};
    write_text(out / "acceptance.json", record.dump(2) + "\n");
  }
};

// --------------------------------------------------------------- criterion 1

Outcome structural_equivalence() {
  Rng rng(2024);
  double worst_mv = 0, worst_rt = 0;
  std::size_t configs = 0;
  while (configs < 200) {
    const std::size_t L = rng.below(5), r = 1 + rng.below(8);
    const std::size_t max_leaf = 256 >> L;
    const std::size_t min_leaf = L == 0 ? 1 : r;
    if (max_leaf < min_leaf) continue;
    const std::size_t leaf = min_leaf + rng.below(max_leaf - min_leaf + 1);
    const std::size_t d = leaf << L;
    const ClusterTree tree(d, L);
    const HssMatrix h = hss_random(tree, r, rng.next_u64());
    const DenseMatrix a = hss_to_dense(h);
    Vector x(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
    const double err = (hss_matvec(h, x) - a * x).norm() / (1 + a.norm() * x.norm());
    worst_mv = std::max(worst_mv, err);
    const DenseMatrix back = hss_to_dense(dense_to_hss(a, tree, r));
    worst_rt = std::max(worst_rt, (back - a).norm() / a.norm());
    ++configs;
  }
  return {worst_mv <= 1e-12 && worst_rt <= 1e-10,
          "200 configs (d<=256, L<=4, r<=8); matvec rel err " + sci(worst_mv) + " (<= 1e-12), round trip " +
              sci(worst_rt) + " (<= 1e-10)"};
}

// --------------------------------------------------------------- criterion 2

Outcome gradient_suite() {
  auto check = [](NeuralHssModel m, const Tensor& x, const Tensor& y, double lambda) {
    NeuralHssModel g = zeros_like(m);
    loss_and_grad(m, x, y, lambda, g);
    auto loss = [&](const NeuralHssModel& p) {
      double v = mse_loss(model_forward(p, x), y).value;
      if (lambda > 0) v += alpha_penalty(alphas(p), lambda).value;
      return v;
    };
    const auto errs = nhss::testing::fd_block_errors(m, g, loss);
    return std::pair{*std::max_element(errs.begin(), errs.end()), errs.size()};
  };
  Rng rng(7);
  auto fill = [&](Tensor t) {
    for (double& v : t.data()) v = rng.normal();
    return t;
  };

  NeuralHssModel one_d = make_hss_model(16, 2, 2, 2, 11);
  std::get<HssLinearLayer>(one_d.layers[0]).alpha = 0.3;
  const auto [e1, n1] = check(one_d, fill(Tensor({4, 16})), fill(Tensor({4, 16})), 0.5);

  NeuralHssModel two_d = make_nd_hss_model(2, 8, 2, 2, 2, 1, 13);
  set_last_activation(two_d, true);
  std::get<NdHssLayer>(two_d.layers[0]).alpha = 0.3;
  const auto [e2, n2] = check(two_d, fill(Tensor({3, 8, 8})), fill(Tensor({3, 8, 8})), 0.5);

  return {std::max(e1, e2) <= 1e-5, "1D model " + std::to_string(n1) + " blocks max rel err " + sci(e1) +
                                        ", 2D NdHss layer " + std::to_string(n2) + " blocks max rel err " + sci(e2) +
                                        " (<= 1e-5)"};
}

// --------------------------------------------------------------- criterion 3

Outcome exact_recovery_check(const fs::path& out) {
  RunConfig<ExactRecoveryConfig> rc;
  rc.out = (out / "exact_recovery").string();
  const Json s = cmd_exact_recovery(rc);
  const Json& m = s["main"];
  const Json& c = s["control"];
  const double mse = m["train_mse"], test = m["test_relative_l2"], dev = m["alpha_deviation"];
  const double control = c["test_relative_l2"];
  const bool pass = mse <= 1e-8 && test <= 1e-3 && dev <= 1e-3 && control >= 1e-1;
  return {pass, "N=" + std::to_string(m["samples"].get<std::size_t>()) + " train MSE " + sci(mse) + " (<= 1e-8), held-out " +
                    sci(test) + " (<= 1e-3), |alpha-1| " + sci(dev) + " (<= 1e-3); N=2 control held-out " +
                    sci(control) + " (>= 1e-1)"};
}

// --------------------------------------------------------------- criterion 4

Outcome data_efficiency_check(const fs::path& out) {
  RunConfig<DataEfficiencyConfig> rc;
  rc.out = (out / "data_efficiency").string();
  const Json s = cmd_data_efficiency(rc);
  std::vector<double> hss, dense;
  std::vector<std::size_t> sizes;
  for (const auto& p : s["points"]) {
    if (p["model"] == "neural_hss") {
      hss.push_back(p["test_error"]);
      sizes.push_back(p["train_size"]);
    } else {
      dense.push_back(p["test_error"]);
    }
  }
  bool trend = true, beats = true;
  std::string lost;
  for (std::size_t i = 0; i < hss.size(); ++i) {
    if (i && hss[i] > 1.5 * hss[i - 1]) trend = false;
    if (hss[i] > dense[i]) {
      beats = false;
      lost += (lost.empty() ? "" : ", ") + std::to_string(sizes[i]);
    }
  }
  const bool final_ok = hss.back() <= 1e-2;
  std::string curve;
  for (std::size_t i = 0; i < hss.size(); ++i)
    curve += (i ? " " : "") + std::to_string(sizes[i]) + ":" + sci(hss[i]) + "/" + sci(dense[i]);
  return {trend && beats && final_ok,
          std::string("hss/dense error ") + curve + "; trend (each <= 1.5x previous) " + (trend ? "ok" : "violated") +
              "; beats dense at every point " + (beats ? "yes" : "no (loses at N=" + lost + ")") + "; N=" +
              std::to_string(sizes.back()) + " error " + sci(hss.back()) + " (<= 1e-2)"};
}

// --------------------------------------------------------------- criterion 5

Outcome kernel_rank_check(const fs::path& out) {
  RunConfig<KernelRankConfig> rc;
  rc.out = (out / "kernel_rank_decay").string();
  const Json s = cmd_kernel_rank_decay(rc);
  const double r2 = s["mean_r2"];
  const std::size_t over = s["blocks_over_4x"], blocks = s["blocks"];
  return {r2 >= 0.9 && over == 0, "log kernel n=512, " + std::to_string(blocks) + " admissible blocks; mean R^2 " +
                                      sci(r2) + " (>= 0.9); blocks with rank(1e-8) > 4 rank(1e-2): " +
                                      std::to_string(over) + " (max ratio " + sci(s["max_growth"]) + ", need 0)"};
}

// --------------------------------------------------------------- criterion 6

Outcome complexity_check(const fs::path& out) {
  RunConfig<BenchConfig> rc;
  rc.out = (out / "bench_matvec").string();
  const Json s = cmd_bench_matvec(rc);
  const double h = s["hss_exponent"], d = s["dense_exponent"], p = s["hss_params_exponent"];
  return {h <= 1.3 && d >= 1.8 && p <= 1.1, "d in {256..16384}, r=4: HSS time exponent " + sci(h) +
                                                " (<= 1.3), dense " + sci(d) + " (>= 1.8), parameter count " +
                                                sci(p) + " (<= 1.1)"};
}

// --------------------------------------------------------------- criterion 7

Outcome heat_check(const fs::path& out) {
  RunConfig<GenConfig> g;
  g.cmd.equation = "heat";
  g.cmd.samples = 200;
  g.seed = 1;
  g.out = (out / "heat" / "train_data").string();
  cmd_gen(g);
  g.cmd.samples = 50;
  g.seed = 2;
  g.out = (out / "heat" / "test_data").string();
  cmd_gen(g);

  RunConfig<TrainCmdConfig> t;
  t.cmd.dataset = (out / "heat" / "train_data").string();
  t.out = (out / "heat" / "run").string();
  const Json ts = cmd_train(t);

  RunConfig<EvalCmdConfig> e;
  e.cmd.model = (out / "heat" / "run" / "model").string();
  e.cmd.dataset = (out / "heat" / "test_data").string();
  e.out = (out / "heat" / "eval").string();
  const Json es = cmd_eval(e);

  double worst_alpha = 0;
  for (double a : ts["alphas"]) worst_alpha = std::max(worst_alpha, std::abs(a - 1));
  const double err = es["mean"];
  return {err <= 5e-2 && worst_alpha <= 0.05, "200 train / 50 held-out trajectories, 41-step rollout trajectory L2 " +
                                                  sci(err) + " (<= 5e-2); max |alpha-1| " + sci(worst_alpha) +
                                                  " (<= 0.05)"};
}

// --------------------------------------------------------------- criterion 8

// Independent stencil residuals on full-resolution data.
double poisson1d_residual(const Tensor& f, const Tensor& u, std::size_t b) {
  const std::size_t n = f.sample_size();
  const double h = 1.0 / double(n - 1);
  auto U = [&](std::size_t i) { return u[b * n + i]; };
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double lhs;
    if (i == 0 || i == n - 1)
      lhs = U(i);
    else if (i == 1 || i == n - 2)
      lhs = (-U(i - 1) + 2 * U(i) - U(i + 1)) / (h * h);
    else
      lhs = (U(i - 2) - 16 * U(i - 1) + 30 * U(i) - 16 * U(i + 1) + U(i + 2)) / (12 * h * h);
    num += (lhs - f[b * n + i]) * (lhs - f[b * n + i]);
    den += f[b * n + i] * f[b * n + i];
  }
  return std::sqrt(num / den);
}

double poisson2d_residual(const Tensor& f, const Tensor& u, std::size_t b) {
  const std::size_t n = f.extent(1), m = n * n;
  const double h = 1.0 / double(n - 1);
  auto U = [&](std::size_t i, std::size_t j) { return u[b * m + i * n + j]; };
  auto F = [&](std::size_t i, std::size_t j) { return f[b * m + i * n + j]; };
  double num = 0, den = 0;
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) {
      const double lhs = (20 * U(i, j) - 4 * (U(i - 1, j) + U(i + 1, j) + U(i, j - 1) + U(i, j + 1)) -
                          (U(i - 1, j - 1) + U(i - 1, j + 1) + U(i + 1, j - 1) + U(i + 1, j + 1))) /
                         (6 * h * h);
      const double rhs = (8 * F(i, j) + F(i - 1, j) + F(i + 1, j) + F(i, j - 1) + F(i, j + 1)) / 12;
      num += (lhs - rhs) * (lhs - rhs);
      den += rhs * rhs;
    }
  return std::sqrt(num / den);
}

bool tensors_bitwise(const Tensor& a, const Tensor& b) { return bitwise_equal(a, b); }

Outcome data_integrity(const fs::path& out) {
  // Poisson residuals, generated without downsampling so the stored pairs
  // are the solved systems.
  Poisson1dOptions p1;
  p1.coarse = p1.fine;
  const Dataset d1 = gen_poisson_1d(200, 5, p1);
  double r1 = 0;
  for (std::size_t b = 0; b < d1.size(); ++b) r1 = std::max(r1, poisson1d_residual(d1.inputs, d1.targets, b));
  Poisson2dOptions p2;
  p2.coarse = p2.fine;
  const Dataset d2 = gen_poisson_2d(20, 6, p2);
  double r2 = 0;
  for (std::size_t b = 0; b < d2.size(); ++b) r2 = std::max(r2, poisson2d_residual(d2.inputs, d2.targets, b));
  const Dataset def1 = gen_poisson_1d(200, 7), def2 = gen_poisson_2d(20, 8);
  const double meta_r = std::max(def1.meta["max_relative_residual"].get<double>(),
                                 def2.meta["max_relative_residual"].get<double>());
  const bool residual_ok = r1 <= 1e-8 && r2 <= 1e-8 && meta_r <= 1e-8;

  // Heat against an independent evaluation of the sine series and against
  // Crank-Nicolson on the generation grid.
  const HeatOptions ho;
  const TrajectoryDataset heat = gen_heat_1d(20, 9, ho);
  const std::size_t steps = heat.steps(), stride = ho.fine / ho.coarse;
  double exact_err = 0, cn_err = 0;
  for (std::size_t s = 0; s < heat.size(); ++s) {
    Rng rng(derive_seed(9, 103, s));
    std::vector<double> c(ho.modes);
    for (double& v : c) v = 2.0 * rng.uniform();
    auto series = [&](std::size_t i, double t) {
      const double x = double(i) / double(ho.fine - 1);
      double v = 0;
      for (std::size_t k = 0; k < ho.modes; ++k) {
        const double kp = double(k + 1) * std::numbers::pi;
        v += c[k] * std::exp(-ho.kappa * kp * kp * t) * std::sin(kp * x);
      }
      return v;
    };
    double mx = 0;
    for (std::size_t i = 0; i < ho.fine; ++i) mx = std::max(mx, std::abs(series(i, 0)));
    Vector u0(static_cast<Eigen::Index>(ho.fine));
    for (std::size_t i = 0; i < ho.fine; ++i) u0[Eigen::Index(i)] = i == 0 || i + 1 == ho.fine ? 0 : series(i, 0) / mx;
    const auto cn = s < 3 ? heat_crank_nicolson(u0, ho.kappa, ho.horizon, ho.dt, 1e-3) : std::vector<Vector>{};
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t i = 0; i < ho.coarse; ++i) {
        const double stored = heat.states[(s * steps + t) * ho.coarse + i];
        const std::size_t fi = i * stride;
        const double oracle = fi == 0 || fi + 1 == ho.fine ? 0.0 : series(fi, double(t) * ho.dt) / mx;
        exact_err = std::max(exact_err, std::abs(stored - oracle));
        if (!cn.empty()) cn_err = std::max(cn_err, std::abs(stored - cn[t][Eigen::Index(fi)]));
      }
  }
  const bool heat_ok = exact_err <= 1e-14 && cn_err <= 1e-4;

  // Round trips.
  bool rt = true;
  const fs::path dir = out / "round_trips";
  auto pairs_rt = [&](const Dataset& ds, const std::string& name) {
    save_dataset(ds, dir / name);
    const Dataset back = load_dataset(dir / name);
    rt = rt && tensors_bitwise(back.inputs, ds.inputs) && tensors_bitwise(back.targets, ds.targets) &&
         back.grid == ds.grid && back.meta == ds.meta && back.equation == ds.equation;
  };
  auto traj_rt = [&](const TrajectoryDataset& ds, const std::string& name) {
    save_dataset(ds, dir / name);
    const TrajectoryDataset back = load_trajectories(dir / name);
    rt = rt && tensors_bitwise(back.states, ds.states) && back.dt == ds.dt && back.grid == ds.grid &&
         back.meta == ds.meta;
  };
  pairs_rt(def1.slice(0, 50), "poisson1d");
  pairs_rt(def2.slice(0, 5), "poisson2d");
  pairs_rt(gen_hss_recovery_dataset(32, 2, 2, 40, 3).data, "recovery");
  traj_rt(heat, "heat");
  traj_rt(gen_burgers_1d(2, 10), "burgers");
  auto model_rt = [&](const NeuralHssModel& m, const std::string& name) {
    save_model(m, dir / name);
    const NeuralHssModel back = load_model(dir / name);
    std::vector<double> a, b;
    for_each_param(m, [&](std::span<const double> s, ParamKind) { a.insert(a.end(), s.begin(), s.end()); });
    for_each_param(back, [&](std::span<const double> s, ParamKind) { b.insert(b.end(), s.begin(), s.end()); });
    rt = rt && a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0 &&
         model_manifest(back) == model_manifest(m);
  };
  NeuralHssModel hm = build_model({}, {256}, 3);
  hm.residual_scale = 0.125;
  model_rt(hm, "model_hss");
  ModelConfig nd;
  nd.kind = "nd_hss";
  nd.outer_rank = 2;
  model_rt(build_model(nd, {64, 64}, 4), "model_nd_hss");
  ModelConfig dn;
  dn.kind = "dense";
  NeuralHssModel dm = build_model(dn, {256}, 5);
  dm.input_scale = 3.5;
  dm.output_scale = 0.25;
  model_rt(dm, "model_dense");

  return {residual_ok && heat_ok && rt,
          "Poisson residual 1D " + sci(r1) + ", 2D " + sci(r2) + ", generator-reported " + sci(meta_r) +
              " (<= 1e-8); heat vs analytic " + sci(exact_err) + " (<= 1e-14), vs Crank-Nicolson " + sci(cn_err) +
              " (<= 1e-4); dataset/model round trips " + (rt ? "bitwise" : "NOT bitwise")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out, "Artifact directory");
  app.add_option("--only", only, "Run only these criterion numbers");
  CLI11_PARSE(app, argc, argv);

  Runner r;
  r.out = out;
  fs::create_directories(r.out);
  auto want = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  if (want(1)) r.run(1, "structural equivalence", 60, structural_equivalence);
  if (want(2)) r.run(2, "gradient suite", 120, gradient_suite);
  if (want(3)) r.run(3, "exact recovery", 600, [&] { return exact_recovery_check(r.out); });
  if (want(4)) r.run(4, "data efficiency trend", 3600, [&] { return data_efficiency_check(r.out); });
  if (want(5)) r.run(5, "kernel rank decay", 120, [&] { return kernel_rank_check(r.out); });
  if (want(6)) r.run(6, "complexity", 300, [&] { return complexity_check(r.out); });
  if (want(7)) r.run(7, "heat operator learning", 1800, [&] { return heat_check(r.out); });
  if (want(8)) r.run(8, "data integrity", 600, [&] { return data_integrity(r.out); });

  std::size_t failed = 0;
  for (const auto& [name, pass] : r.results) failed += !pass;
  std::printf("%zu/%zu criteria passed\n", r.results.size() - failed, r.results.size());
  return failed ? 1 : 0;
}
