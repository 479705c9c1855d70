#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nhss/core/rng.hpp"
#include "nhss/experiments/stats.hpp"
#include "nhss/hss/matvec.hpp"

namespace nhss {

struct BenchConfig {
  std::vector<std::size_t> sizes = {256, 1024, 4096, 16384};
  std::size_t rank = 4;  // leaf size is 2 * rank
  std::size_t reps = 20;
  std::size_t warmup = 3;
  bool dense = true;

  void validate() const {
    if (sizes.size() < 2) throw ConfigError("bench-matvec: need at least two sizes");
    if (rank == 0) throw ConfigError("bench-matvec: rank must be >= 1");
    if (reps < 20) throw ConfigError("bench-matvec: reps must be >= 20");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (i && sizes[i] <= sizes[i - 1]) throw ConfigError("bench-matvec: sizes must be increasing");
      bench_depth(sizes[i]);
    }
  }

  /// Depth giving leaves of exactly 2 * rank.
  std::size_t bench_depth(std::size_t d) const {
    const std::size_t leaf = 2 * rank;
    std::size_t depth = 0;
    while ((leaf << depth) < d) ++depth;
    if ((leaf << depth) != d)
      throw ConfigError("bench-matvec: d=" + std::to_string(d) + " is not 2 * rank * 2^L");
    return depth;
  }
};

struct BenchRecord {
  std::size_t d = 0;
  std::string structure;  // "hss" or "dense"
  double median_ns = 0;
  std::size_t reps = 0;
  std::size_t params = 0;
};

struct BenchReport {
  std::vector<BenchRecord> records;
  LineFit hss_time, dense_time, hss_params;  // power-law fits against d
};

namespace detail {
template <class F>
double median_ns(F&& f, std::size_t warmup, std::size_t reps) {
  for (std::size_t i = 0; i < warmup; ++i) f();
  std::vector<double> t;
  for (std::size_t i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count());
  }
  return median(std::move(t));
}
}  // namespace detail

/// Median single-vector matvec time for HSS (leaf 2r) and dense d x d.
/// The dense matrix at d = 16384 needs about 2 GiB.
inline BenchReport bench_matvec(const BenchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BenchReport rep;
  std::vector<double> ds, th, td, ph;
  volatile double sink = 0;
  for (std::size_t d : cfg.sizes) {
    Rng rng(derive_seed(seed, 201, d));
    Vector x(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.normal();

    const HssMatrix h = hss_random(ClusterTree(d, cfg.bench_depth(d)), cfg.rank, derive_seed(seed, 202, d));
    const double t_h = detail::median_ns([&] { sink = sink + hss_matvec(h, x)[0]; }, cfg.warmup, cfg.reps);
    rep.records.push_back({d, "hss", t_h, cfg.reps, hss_param_count(h)});
    ds.push_back(double(d));
    th.push_back(t_h);
    ph.push_back(double(hss_param_count(h)));

    if (cfg.dense) {
      DenseMatrix a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      const double s = 1.0 / std::sqrt(double(d));
      for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-s, s);
      Vector y(static_cast<Eigen::Index>(d));
      const double t_d = detail::median_ns([&] { y.noalias() = a * x; sink = sink + y[0]; }, cfg.warmup, cfg.reps);
      rep.records.push_back({d, "dense", t_d, cfg.reps, d * d});
      td.push_back(t_d);
    }
  }
  rep.hss_time = fit_power_law(ds, th);
  rep.hss_params = fit_power_law(ds, ph);
  if (cfg.dense) rep.dense_time = fit_power_law(ds, td);
  return rep;
}

inline void write_bench_csv(const BenchReport& r, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f.precision(17);
  f << "d,structure,median_ns,reps\n";
  for (const auto& b : r.records) f << b.d << ',' << b.structure << ',' << b.median_ns << ',' << b.reps << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace nhss
