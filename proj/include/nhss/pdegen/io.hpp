#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhss/core/binary_io.hpp"
#include "nhss/pdegen/dataset.hpp"

namespace nhss {

// Dataset on disk: <dir>/dataset.json plus one raw little-endian double file
// per tensor, row-major, named in the manifest.

inline constexpr int kDatasetSchema = 1;

namespace detail {

inline nlohmann::json grid_json(const GridSpec& g) {
  return {{"extent", g.extent}, {"gen_extent", g.gen_extent}, {"lo", g.lo}, {"hi", g.hi}};
}

inline nlohmann::json tensor_entry(const std::string& file, const Tensor& t) {
  return {{"file", file}, {"shape", t.shape()}};
}

template <class T>
T field(const nlohmann::json& j, const std::string& path) {
  const nlohmann::json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(key)) throw IoError("dataset manifest: missing field '" + path + "'");
    cur = &cur->at(key);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return cur->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw IoError("dataset manifest: field '" + path + "' has the wrong type");
  }
}

inline Tensor load_tensor(const std::filesystem::path& dir, const nlohmann::json& j, const std::string& name) {
  const std::string base = "tensors." + name;
  const auto file = field<std::string>(j, base + ".file");
  Shape shape;
  try {
    shape = field<Shape>(j, base + ".shape");
  } catch (const IoError&) {
    throw IoError("dataset manifest: field '" + base + ".shape' is not a list of extents");
  }
  if (shape.empty()) throw IoError("dataset manifest: field '" + base + ".shape' is empty");
  auto data = read_doubles_le(dir / file, shape_size(shape));
  return Tensor(std::move(shape), std::move(data));
}

inline GridSpec load_grid(const nlohmann::json& j) {
  GridSpec g{field<std::vector<std::size_t>>(j, "grid.extent"), field<std::vector<std::size_t>>(j, "grid.gen_extent"),
             field<std::vector<double>>(j, "grid.lo"), field<std::vector<double>>(j, "grid.hi")};
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("dataset manifest: field 'grid': ") + e.what());
  }
  return g;
}

inline nlohmann::json read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "dataset.json";
  if (!std::filesystem::exists(path)) throw IoError("missing dataset manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("dataset manifest " + path.string() + ": " + e.what());
  }
  if (field<std::string>(j, "format") != "neural-hss-dataset") throw IoError("dataset manifest: field 'format' is wrong");
  if (field<int>(j, "schema_version") != kDatasetSchema)
    throw IoError("dataset manifest: field 'schema_version' is unsupported");
  return j;
}

inline void check_grid(const GridSpec& g, const Shape& s, std::size_t lead) {
  if (s.size() != lead + g.dims()) throw IoError("dataset manifest: field 'grid.extent' does not match tensor rank");
  for (std::size_t j = 0; j < g.dims(); ++j)
    if (s[lead + j] != g.extent[j]) throw IoError("dataset manifest: field 'grid.extent' does not match tensor shape");
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  write_doubles_le(dir / "inputs.bin", ds.inputs.data());
  write_doubles_le(dir / "targets.bin", ds.targets.data());
  nlohmann::json j = {{"format", "neural-hss-dataset"},
                      {"schema_version", kDatasetSchema},
                      {"kind", "pairs"},
                      {"equation", ds.equation},
                      {"grid", detail::grid_json(ds.grid)},
                      {"meta", ds.meta},
                      {"tensors",
                       {{"inputs", detail::tensor_entry("inputs.bin", ds.inputs)},
                        {"targets", detail::tensor_entry("targets.bin", ds.targets)}}}};
  write_text(dir / "dataset.json", j.dump(2) + "\n");
}

inline void save_dataset(const TrajectoryDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_doubles_le(dir / "states.bin", ds.states.data());
  nlohmann::json j = {{"format", "neural-hss-dataset"},
                      {"schema_version", kDatasetSchema},
                      {"kind", "trajectories"},
                      {"equation", ds.equation},
                      {"dt", ds.dt},
                      {"grid", detail::grid_json(ds.grid)},
                      {"meta", ds.meta},
                      {"tensors", {{"states", detail::tensor_entry("states.bin", ds.states)}}}};
  write_text(dir / "dataset.json", j.dump(2) + "\n");
}

/// "pairs" or "trajectories".
inline std::string dataset_kind(const std::filesystem::path& dir) {
  return detail::field<std::string>(detail::read_manifest(dir), "kind");
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto j = detail::read_manifest(dir);
  if (detail::field<std::string>(j, "kind") != "pairs")
    throw IoError("dataset manifest: field 'kind' is not 'pairs' in " + dir.string());
  Dataset ds;
  ds.equation = detail::field<std::string>(j, "equation");
  ds.grid = detail::load_grid(j);
  ds.meta = j.value("meta", nlohmann::json::object());
  ds.inputs = detail::load_tensor(dir, j, "inputs");
  ds.targets = detail::load_tensor(dir, j, "targets");
  if (ds.inputs.batch() != ds.targets.batch())
    throw IoError("dataset manifest: field 'tensors.targets.shape' disagrees with inputs on the sample count");
  detail::check_grid(ds.grid, ds.inputs.shape(), 1);
  return ds;
}

inline TrajectoryDataset load_trajectories(const std::filesystem::path& dir) {
  const auto j = detail::read_manifest(dir);
  if (detail::field<std::string>(j, "kind") != "trajectories")
    throw IoError("dataset manifest: field 'kind' is not 'trajectories' in " + dir.string());
  TrajectoryDataset ds;
  ds.equation = detail::field<std::string>(j, "equation");
  ds.dt = detail::field<double>(j, "dt");
  ds.grid = detail::load_grid(j);
  ds.meta = j.value("meta", nlohmann::json::object());
  ds.states = detail::load_tensor(dir, j, "states");
  detail::check_grid(ds.grid, ds.states.shape(), 2);
  return ds;
}

}  // namespace nhss
