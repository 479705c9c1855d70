#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nhss/core/dense.hpp"
#include "nhss/core/parallel.hpp"
#include "nhss/core/rng.hpp"
#include "nhss/pdegen/poisson.hpp"

namespace nhss {

namespace detail {

inline std::size_t output_steps(double horizon, double dt) {
  if (!(dt > 0) || !(horizon > 0)) throw ConfigError("trajectory: T and dt must be positive");
  const double q = horizon / dt;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9 * std::max(1.0, q)) throw ConfigError("trajectory: T must be a multiple of dt");
  return static_cast<std::size_t>(r) + 1;
}

inline double grid_x(std::size_t i, std::size_t n) { return static_cast<double>(i) / static_cast<double>(n - 1); }

}  // namespace detail

/// Solves the tridiagonal system (sub, diag, sup) x = rhs in place of rhs.
/// sub[0] and sup[n-1] are ignored. No pivoting: the caller guarantees
/// diagonal dominance.
inline void solve_tridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                              std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

// ---------------------------------------------------------------- heat

struct HeatOptions {
  std::size_t fine = 1024;
  std::size_t coarse = 256;
  std::size_t modes = 10;
  double kappa = 2e-4;
  double horizon = 8.0;
  double dt = 0.2;
};

/// Sine amplitudes a_k of u0 = sum_k a_k sin(k pi x) scaled so that
/// max |u0| = 1 on the n-point generation grid. Zero stays zero.
inline std::vector<double> heat_normalized_amplitudes(std::span<const double> a, std::size_t n) {
  double mx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
      s += a[k] * std::sin(static_cast<double>(k + 1) * std::numbers::pi * detail::grid_x(i, n));
    mx = std::max(mx, std::abs(s));
  }
  std::vector<double> out(a.begin(), a.end());
  if (mx > 0)
    for (double& v : out) v /= mx;
  return out;
}

/// Exact solution sum_k a_k exp(-kappa k^2 pi^2 t) sin(k pi x) on n points.
inline Vector heat_exact(std::span<const double> a, double kappa, double t, std::size_t n) {
  Vector u(static_cast<Eigen::Index>(n));
  std::vector<double> decay(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double kp = static_cast<double>(k + 1) * std::numbers::pi;
    decay[k] = a[k] * std::exp(-kappa * kp * kp * t);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
      s += decay[k] * std::sin(static_cast<double>(k + 1) * std::numbers::pi * detail::grid_x(i, n));
    u[static_cast<Eigen::Index>(i)] = s;
  }
  u[0] = 0.0;
  u[static_cast<Eigen::Index>(n) - 1] = 0.0;
  return u;
}

/// Crank-Nicolson with the three-point Laplacian, Dirichlet ends. Returns the
/// states at every multiple of dt_out up to `horizon` (including t = 0).
inline std::vector<Vector> heat_crank_nicolson(const Vector& u0, double kappa, double horizon, double dt_out,
                                               double dt_int) {
  const std::size_t outs = detail::output_steps(horizon, dt_out);
  const auto sub = static_cast<std::size_t>(std::llround(dt_out / dt_int));
  if (sub == 0 || std::abs(static_cast<double>(sub) * dt_int - dt_out) > 1e-12)
    throw ConfigError("heat: internal step must divide the output step");
  const std::size_t n = static_cast<std::size_t>(u0.size());
  const double h = 1.0 / static_cast<double>(n - 1);
  const double r = kappa * dt_int / (h * h);
  std::vector<double> a(n, -r / 2), b(n, 1 + r), c(n, -r / 2);
  a[n - 1] = c[0] = 0;
  b[0] = b[n - 1] = 1;
  std::vector<Vector> out{u0};
  std::vector<double> u(u0.data(), u0.data() + n), rhs(n);
  for (std::size_t o = 1; o < outs; ++o) {
    for (std::size_t s = 0; s < sub; ++s) {
      rhs[0] = rhs[n - 1] = 0;
      for (std::size_t i = 1; i + 1 < n; ++i) rhs[i] = u[i] + r / 2 * (u[i - 1] - 2 * u[i] + u[i + 1]);
      solve_tridiagonal(a, b, c, rhs);
      u = rhs;
    }
    out.emplace_back(Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(n)));
  }
  return out;
}

/// Analytic trajectories from random sine initial conditions
/// u0 = sum_k 2 c_k sin(k pi x), c_k ~ U(0,1), normalized on the generation grid.
inline TrajectoryDataset gen_heat_1d(std::size_t n_traj, std::uint64_t seed, const HeatOptions& opt = {}) {
  if (n_traj == 0) throw ConfigError("heat: n_traj must be >= 1");
  const std::size_t steps = detail::output_steps(opt.horizon, opt.dt);
  GridSpec grid = unit_grid({opt.coarse}, {opt.fine});
  const std::size_t stride = grid.stride();
  TrajectoryDataset ds{"heat1d", Tensor({n_traj, steps, opt.coarse}), opt.dt, grid, {}};
  parallel_chunks(n_traj, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> c(opt.modes);
    for (std::size_t s = lo; s < hi; ++s) {
      Rng rng(derive_seed(seed, 103, s));
      for (double& ck : c) ck = 2.0 * rng.uniform();
      const auto a = heat_normalized_amplitudes(c, opt.fine);
      for (std::size_t t = 0; t < steps; ++t) {
        const Vector u = heat_exact(a, opt.kappa, static_cast<double>(t) * opt.dt, opt.fine);
        for (std::size_t i = 0; i < opt.coarse; ++i)
          ds.states[(s * steps + t) * opt.coarse + i] = u[static_cast<Eigen::Index>(i * stride)];
      }
    }
  });
  ds.meta = {{"generator_version", kGeneratorVersion},
             {"seed", seed},
             {"trajectories", n_traj},
             {"modes", opt.modes},
             {"kappa", opt.kappa},
             {"T", opt.horizon},
             {"dt", opt.dt},
             {"coefficients", "u0 = sum_k 2 c_k sin(k pi x), c_k ~ U(0,1), max |u0| = 1 on the generation grid"},
             {"solver", "exact sine-series solution"},
             {"sub_seed", "derive_seed(seed, 103, trajectory)"}};
  return ds;
}

/// Initial heat state of trajectory `index` on the generation grid, as drawn by gen_heat_1d.
inline std::vector<double> heat_trajectory_amplitudes(std::uint64_t seed, std::size_t index,
                                                      const HeatOptions& opt = {}) {
  Rng rng(derive_seed(seed, 103, index));
  std::vector<double> c(opt.modes);
  for (double& ck : c) ck = 2.0 * rng.uniform();
  return heat_normalized_amplitudes(c, opt.fine);
}

// ---------------------------------------------------------------- Burgers

struct BurgersOptions {
  std::size_t fine = 1024;
  std::size_t coarse = 256;
  std::size_t modes = 10;
  double nu = 1e-3;
  double horizon = 15.0;
  double dt = 0.2;
  double dt_internal = 5e-4;
  double newton_tol = 1e-12;
  std::size_t newton_max_iter = 30;
};

/// u0 = sum_k c_k sin(2 pi (k+1) x) on n points, normalized to max |u0| = 1.
inline Vector burgers_initial(std::span<const double> c, std::size_t n) {
  Vector u(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < c.size(); ++k)
      s += c[k] * std::sin(2.0 * std::numbers::pi * static_cast<double>(k + 2) * detail::grid_x(i, n));
    u[static_cast<Eigen::Index>(i)] = s;
  }
  u[0] = 0.0;
  u[static_cast<Eigen::Index>(n) - 1] = 0.0;
  const double mx = u.cwiseAbs().maxCoeff();
  if (mx > 0) u /= mx;
  return u;
}

/// Integrates u_t + (u^2/2)_x = nu u_xx with central differences and the
/// implicit trapezoidal rule (Newton on a tridiagonal Jacobian), Dirichlet
/// ends. Returns the states at every multiple of opt.dt including t = 0.
inline std::vector<Vector> burgers_integrate(const Vector& u0, const BurgersOptions& opt) {
  const std::size_t outs = detail::output_steps(opt.horizon, opt.dt);
  const auto sub = static_cast<std::size_t>(std::llround(opt.dt / opt.dt_internal));
  if (sub == 0 || std::abs(static_cast<double>(sub) * opt.dt_internal - opt.dt) > 1e-12)
    throw ConfigError("burgers: internal step must divide the output step");
  const std::size_t n = static_cast<std::size_t>(u0.size());
  if (n < 3) throw ConfigError("burgers: need at least 3 grid points");
  const double h = 1.0 / static_cast<double>(n - 1);
  const double k = opt.dt_internal, adv = 1.0 / (4 * h), dif = opt.nu / (h * h);

  auto rate = [&](const std::vector<double>& u, std::vector<double>& f) {
    f[0] = f[n - 1] = 0;
    for (std::size_t i = 1; i + 1 < n; ++i)
      f[i] = -adv * (u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) + dif * (u[i + 1] - 2 * u[i] + u[i - 1]);
  };

  std::vector<double> u(u0.data(), u0.data() + n), w(n), fu(n), fw(n), g(n), lo(n), di(n), up(n);
  u[0] = u[n - 1] = 0;
  std::vector<Vector> out{Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(n))};
  for (std::size_t o = 1; o < outs; ++o) {
    for (std::size_t s = 0; s < sub; ++s) {
      rate(u, fu);
      w = u;
      bool converged = false;
      for (std::size_t it = 0; it < opt.newton_max_iter; ++it) {
        rate(w, fw);
        for (std::size_t i = 0; i < n; ++i) g[i] = -(w[i] - u[i] - 0.5 * k * (fu[i] + fw[i]));
        g[0] = g[n - 1] = 0;
        std::fill(lo.begin(), lo.end(), 0.0);
        std::fill(up.begin(), up.end(), 0.0);
        std::fill(di.begin(), di.end(), 1.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
          lo[i] = -0.5 * k * (2 * adv * w[i - 1] + dif);
          di[i] = 1.0 + k * dif;
          up[i] = -0.5 * k * (-2 * adv * w[i + 1] + dif);
        }
        solve_tridiagonal(lo, di, up, g);
        double step = 0, scale = 1;
        for (std::size_t i = 0; i < n; ++i) {
          w[i] += g[i];
          step = std::max(step, std::abs(g[i]));
          scale = std::max(scale, std::abs(w[i]));
        }
        if (!std::isfinite(step)) break;
        if (step <= opt.newton_tol * scale) {
          converged = true;
          break;
        }
      }
      if (!converged) throw ComputeError("burgers: Newton did not converge");
      u.swap(w);
    }
    out.emplace_back(Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(n)));
  }
  return out;
}

inline TrajectoryDataset gen_burgers_1d(std::size_t n_traj, std::uint64_t seed, const BurgersOptions& opt = {}) {
  if (n_traj == 0) throw ConfigError("burgers: n_traj must be >= 1");
  const std::size_t steps = detail::output_steps(opt.horizon, opt.dt);
  GridSpec grid = unit_grid({opt.coarse}, {opt.fine});
  const std::size_t stride = grid.stride();
  TrajectoryDataset ds{"burgers1d", Tensor({n_traj, steps, opt.coarse}), opt.dt, grid, {}};
  std::vector<std::string> failures(n_traj);
  parallel_chunks(n_traj, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> c(opt.modes);
    for (std::size_t s = lo; s < hi; ++s) {
      Rng rng(derive_seed(seed, 104, s));
      for (double& ck : c) ck = rng.uniform(-1.0, 1.0);
      std::vector<Vector> traj;
      try {
        traj = burgers_integrate(burgers_initial(c, opt.fine), opt);
      } catch (const ComputeError& e) {
        failures[s] = e.what();
        continue;
      }
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t i = 0; i < opt.coarse; ++i)
          ds.states[(s * steps + t) * opt.coarse + i] = traj[t][static_cast<Eigen::Index>(i * stride)];
    }
  });
  for (std::size_t s = 0; s < n_traj; ++s)
    if (!failures[s].empty()) throw ComputeError(failures[s] + " (trajectory " + std::to_string(s) + ")");
  ds.meta = {{"generator_version", kGeneratorVersion},
             {"seed", seed},
             {"trajectories", n_traj},
             {"modes", opt.modes},
             {"nu", opt.nu},
             {"T", opt.horizon},
             {"dt", opt.dt},
             {"dt_internal", opt.dt_internal},
             {"coefficients", "u0 = sum_k c_k sin(2 pi (k+1) x), c_k ~ U(-1,1), max |u0| = 1 on the generation grid"},
             {"solver", "conservative central differences, implicit trapezoidal rule with Newton iterations"},
             {"sub_seed", "derive_seed(seed, 104, trajectory)"}};
  return ds;
}

}  // namespace nhss
