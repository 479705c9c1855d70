#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "nhss/experiments/stats.hpp"
#include "nhss/hss/cluster_tree.hpp"
#include "nhss/hss/compress.hpp"

namespace nhss {

struct KernelRankConfig {
  std::string kernel = "log";  // "log" (log|z|) or "inverse" (1/|z|)
  std::size_t n = 512;
  std::size_t depth = 4;
  double eta = 1.0;
  std::vector<double> eps = {1e-2, 1e-4, 1e-6, 1e-8};

  void validate() const {
    if (kernel != "log" && kernel != "inverse")
      throw ConfigError("kernel-rank-decay: kernel must be 'log' or 'inverse', got '" + kernel + "'");
    if (eps.size() < 2) throw ConfigError("kernel-rank-decay: need at least two tolerances");
    for (double e : eps)
      if (!(e > 0 && e < 1)) throw ConfigError("kernel-rank-decay: tolerances must lie in (0, 1)");
    if (!(eta > 0)) throw ConfigError("kernel-rank-decay: eta must be positive");
    ClusterTree(n, depth);
  }
};

inline std::function<double(double)> kernel_function(const std::string& name) {
  if (name == "log") return [](double z) { return std::log(std::abs(z)); };
  if (name == "inverse") return [](double z) { return 1.0 / std::abs(z); };
  throw ConfigError("unknown kernel '" + name + "'");
}

/// Geometric extent on [0, 1] of a cluster of cells out of n.
inline double cluster_diameter(const Interval& c, std::size_t n) {
  return static_cast<double>(c.size()) / static_cast<double>(n);
}

/// Gap between two clusters of cells (0 when they touch or overlap).
inline double cluster_distance(const Interval& a, const Interval& b, std::size_t n) {
  const std::size_t gap = a.hi <= b.lo ? b.lo - a.hi : (b.hi <= a.lo ? a.lo - b.hi : 0);
  return static_cast<double>(gap) / static_cast<double>(n);
}

/// max(diam a, diam b) <= eta * dist(a, b). Touching clusters never qualify.
inline bool admissible(const Interval& a, const Interval& b, std::size_t n, double eta) {
  const double dist = cluster_distance(a, b, n);
  return dist > 0 && std::max(cluster_diameter(a, n), cluster_diameter(b, n)) <= eta * dist;
}

/// Galerkin block <phi_i, k(x - y) phi_j> over rows `a` and columns `b`
/// with the L2-normalized piecewise-constant basis on n uniform cells of
/// [0, 1], integrated by 4-point Gauss-Legendre per cell and direction.
/// Intended for separated clusters, where the integrand is smooth.
inline DenseMatrix kernel_block(const std::function<double(double)>& k, std::size_t n, const Interval& a,
                                const Interval& b) {
  static constexpr std::array<double, 4> node = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                                 0.8611363115940526};
  static constexpr std::array<double, 4> weight = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                                   0.3478548451374538};
  const double h = 1.0 / static_cast<double>(n);
  auto point = [&](std::size_t cell, std::size_t q) { return (static_cast<double>(cell) + 0.5 * (1 + node[q])) * h; };
  DenseMatrix m(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      double s = 0;
      for (std::size_t p = 0; p < 4; ++p)
        for (std::size_t q = 0; q < 4; ++q) s += weight[p] * weight[q] * k(point(a.lo + i, p) - point(b.lo + j, q));
      // (h/2)^2 from the quadrature, times (1/sqrt(h))^2 from the basis.
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.25 * h * s;
    }
  return m;
}

struct BlockRank {
  std::size_t level = 0;
  Interval rows, cols;
  std::vector<std::size_t> ranks;  // one per tolerance
  LineFit fit;                     // rank against log(1/eps)
};

struct KernelRankReport {
  std::vector<BlockRank> blocks;
  double mean_slope = 0;
  double mean_r2 = 0;
  double max_growth = 0;  // max over blocks of rank(last eps) / rank(first eps)
};

/// epsilon-rank of every admissible same-level block (row cluster before
/// column cluster) at levels 1..depth, with tolerances relative to the
/// block's Frobenius norm.
inline KernelRankReport kernel_rank_decay(const KernelRankConfig& cfg) {
  cfg.validate();
  const auto k = kernel_function(cfg.kernel);
  const ClusterTree tree(cfg.n, cfg.depth);
  std::vector<double> logs;
  for (double e : cfg.eps) logs.push_back(std::log(1.0 / e));
  KernelRankReport rep;
  for (std::size_t level = 1; level <= cfg.depth; ++level) {
    const auto nodes = tree.level_nodes(level);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = i + 1; j < nodes.size(); ++j) {
        if (!admissible(nodes[i], nodes[j], cfg.n, cfg.eta)) continue;
        const DenseMatrix b = kernel_block(k, cfg.n, nodes[i], nodes[j]);
        const double norm = b.norm();
        BlockRank br{level, nodes[i], nodes[j], {}, {}};
        std::vector<double> r;
        for (double e : cfg.eps) {
          br.ranks.push_back(epsilon_rank(b, e * norm));
          r.push_back(static_cast<double>(br.ranks.back()));
        }
        br.fit = fit_line(logs, r);
        rep.blocks.push_back(std::move(br));
      }
  }
  if (rep.blocks.empty()) throw ConfigError("kernel-rank-decay: no admissible blocks for this tree and eta");
  for (const auto& b : rep.blocks) {
    rep.mean_slope += b.fit.slope;
    rep.mean_r2 += b.fit.r2;
    rep.max_growth = std::max(rep.max_growth, double(b.ranks.back()) / double(std::max<std::size_t>(b.ranks.front(), 1)));
  }
  rep.mean_slope /= static_cast<double>(rep.blocks.size());
  rep.mean_r2 /= static_cast<double>(rep.blocks.size());
  return rep;
}

}  // namespace nhss
