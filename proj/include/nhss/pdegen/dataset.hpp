#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhss/core/error.hpp"
#include "nhss/neural/tensor.hpp"

namespace nhss {

/// Uniform tensor-product grid including both endpoints of each interval.
/// `extent` is the stored (downsampled) size per mode, `gen_extent` the size
/// the data was generated on.
struct GridSpec {
  std::vector<std::size_t> extent;
  std::vector<std::size_t> gen_extent;
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dims() const { return extent.size(); }
  /// Spacing of the generation grid along mode j.
  double h(std::size_t j = 0) const { return (hi.at(j) - lo.at(j)) / static_cast<double>(gen_extent.at(j) - 1); }
  std::size_t stride(std::size_t j = 0) const { return gen_extent.at(j) / extent.at(j); }
  /// Coordinate of stored index i along mode j.
  double coord(std::size_t j, std::size_t i) const { return lo.at(j) + static_cast<double>(i * stride(j)) * h(j); }

  void validate() const {
    const std::size_t m = extent.size();
    if (m == 0 || gen_extent.size() != m || lo.size() != m || hi.size() != m)
      throw ConfigError("grid: extent, gen_extent, lo and hi must have the same nonzero length");
    for (std::size_t j = 0; j < m; ++j) {
      if (extent[j] < 2) throw ConfigError("grid: extent must be >= 2");
      if (gen_extent[j] < extent[j] || gen_extent[j] % extent[j] != 0)
        throw ConfigError("grid: gen_extent " + std::to_string(gen_extent[j]) + " is not a multiple of extent " +
                          std::to_string(extent[j]));
      if (!(hi[j] > lo[j])) throw ConfigError("grid: need hi > lo");
    }
  }

  bool operator==(const GridSpec&) const = default;
};

inline GridSpec unit_grid(std::vector<std::size_t> extent, std::vector<std::size_t> gen_extent) {
  GridSpec g{std::move(extent), std::move(gen_extent), {}, {}};
  g.lo.assign(g.extent.size(), 0.0);
  g.hi.assign(g.extent.size(), 1.0);
  g.validate();
  return g;
}

/// Input/target pairs. The leading extent of both tensors is the sample count.
struct Dataset {
  std::string equation;
  Tensor inputs;
  Tensor targets;
  GridSpec grid;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t size() const { return inputs.batch(); }

  void validate() const {
    if (inputs.rank() == 0 || targets.rank() == 0 || inputs.batch() != targets.batch())
      throw ShapeError("dataset: inputs " + shape_str(inputs.shape()) + " and targets " +
                       shape_str(targets.shape()) + " disagree on the sample count");
  }

  /// Rows [lo, hi) as a new dataset with the same metadata.
  Dataset slice(std::size_t lo, std::size_t hi) const {
    if (lo > hi || hi > size())
      throw ConfigError("dataset: slice [" + std::to_string(lo) + ", " + std::to_string(hi) + ") exceeds " +
                        std::to_string(size()) + " samples");
    return {equation, inputs.slice(lo, hi), targets.slice(lo, hi), grid, meta};
  }
};

/// Sampled trajectories, states shaped (N, T_steps, grid...).
struct TrajectoryDataset {
  std::string equation;
  Tensor states;
  double dt = 0;
  GridSpec grid;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t size() const { return states.batch(); }
  std::size_t steps() const { return states.extent(1); }
  Shape state_shape() const { return Shape(states.shape().begin() + 2, states.shape().end()); }

  /// Trajectory i as a (T_steps, grid...) tensor.
  Tensor trajectory(std::size_t i) const {
    Tensor t = states.slice(i, i + 1);
    return t.reshaped(Shape(states.shape().begin() + 1, states.shape().end()));
  }

  TrajectoryDataset slice(std::size_t lo, std::size_t hi) const {
    if (lo > hi || hi > size())
      throw ConfigError("dataset: slice [" + std::to_string(lo) + ", " + std::to_string(hi) + ") exceeds " +
                        std::to_string(size()) + " trajectories");
    return {equation, states.slice(lo, hi), dt, grid, meta};
  }
};

/// One-step pairs (u_t, u_{t+dt}) of every trajectory, trajectory-major.
inline Dataset step_pairs(const TrajectoryDataset& ds) {
  const std::size_t n = ds.size(), t = ds.steps();
  if (t < 2) throw ShapeError("step_pairs: need at least two states per trajectory");
  Shape s = ds.state_shape();
  const std::size_t m = shape_size(s);
  Shape batched = s;
  batched.insert(batched.begin(), n * (t - 1));
  Dataset out{ds.equation, Tensor(batched), Tensor(batched), ds.grid, ds.meta};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k + 1 < t; ++k) {
      const double* src = ds.states.data().data() + (i * t + k) * m;
      const std::size_t row = i * (t - 1) + k;
      std::copy_n(src, m, out.inputs.data().data() + row * m);
      std::copy_n(src + m, m, out.targets.data().data() + row * m);
    }
  return out;
}

/// Strided subsampling of the trailing modes, keeping index 0 of every
/// stride block. `factors` has one entry per trailing mode.
inline Tensor downsample(const Tensor& t, const std::vector<std::size_t>& factors) {
  const std::size_t m = factors.size();
  if (m > t.rank()) throw ShapeError("downsample: more factors than modes");
  const std::size_t lead = t.rank() - m;
  Shape out_shape = t.shape();
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t e = t.extent(lead + j), f = factors[j];
    if (f == 0 || e % f != 0)
      throw ShapeError("downsample: factor " + std::to_string(f) + " does not divide extent " + std::to_string(e));
    out_shape[lead + j] = e / f;
  }
  Tensor out(out_shape);
  std::vector<std::size_t> in_strides(t.rank(), 1);
  for (std::size_t j = t.rank() - 1; j-- > 0;) in_strides[j] = in_strides[j + 1] * t.extent(j + 1);
  std::vector<std::size_t> idx(t.rank(), 0);
  for (std::size_t o = 0; o < out.size(); ++o) {
    std::size_t src = 0;
    for (std::size_t j = 0; j < t.rank(); ++j) {
      const std::size_t f = j < lead ? 1 : factors[j - lead];
      src += idx[j] * f * in_strides[j];
    }
    out[o] = t[src];
    for (std::size_t j = t.rank(); j-- > 0;) {
      if (++idx[j] < out_shape[j]) break;
      idx[j] = 0;
    }
  }
  return out;
}

}  // namespace nhss
