#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhss/core/binary_io.hpp"
#include "nhss/neural/model.hpp"

namespace nhss {

// Model on disk: <dir>/model.json (structure, scales, alphas, seed) and
// <dir>/params.bin (every parameter block, in for_each_param order, as
// little-endian doubles).

namespace detail {

inline nlohmann::json map_manifest(const LinearTensorMap& m) {
  nlohmann::json j;
  j["kind"] = m.kind == LinearTensorMap::Kind::Dense ? "dense" : "cp";
  j["in_shape"] = m.in_shape;
  j["out_shape"] = m.out_shape;
  if (m.kind == LinearTensorMap::Kind::Cp) j["rank"] = m.cp_rank();
  return j;
}

inline LinearTensorMap map_from_manifest(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  Shape in = j.at("in_shape").get<Shape>(), out = j.at("out_shape").get<Shape>();
  if (kind == "dense") return make_dense_map(in, out, 0, 0.0);
  if (kind == "cp") return make_cp_map(in, out, j.at("rank").get<std::size_t>(), 0, 0.0);
  throw IoError("model manifest: unknown tensor map kind '" + kind + "'");
}

}  // namespace detail

inline nlohmann::json model_manifest(const NeuralHssModel& m) {
  nlohmann::json j;
  j["format"] = "neural-hss-model";
  j["version"] = 1;
  j["seed"] = m.seed;
  j["init_scale"] = m.init_scale;
  j["residual_scale"] = m.residual_scale ? nlohmann::json(*m.residual_scale) : nlohmann::json(nullptr);
  j["input_scale"] = m.input_scale;
  j["output_scale"] = m.output_scale;
  j["lift"] = m.lift ? detail::map_manifest(*m.lift) : nlohmann::json(nullptr);
  j["project"] = m.project ? detail::map_manifest(*m.project) : nlohmann::json(nullptr);
  auto layers = nlohmann::json::array();
  for (const auto& layer : m.layers) {
    nlohmann::json l;
    std::visit(
        [&](const auto& x) {
          using L = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<L, HssLinearLayer>) {
            l["type"] = "hss";
            l["d"] = x.weight.size();
            l["levels"] = x.weight.depth();
            l["rank"] = x.weight.rank();
          } else if constexpr (std::is_same_v<L, NdHssLayer>) {
            l["type"] = "nd_hss";
            l["modes"] = x.modes;
            l["d"] = x.extent();
            l["levels"] = x.factors[0][0].depth();
            auto ranks = nlohmann::json::array();
            for (const auto& row : x.factors) {
              auto rr = nlohmann::json::array();
              for (const auto& h : row) rr.push_back(h.rank());
              ranks.push_back(rr);
            }
            l["ranks"] = ranks;
          } else {
            l["type"] = "dense";
            l["in"] = x.in_size();
            l["out"] = x.out_size();
          }
          l["alpha"] = x.alpha;
          l["use_activation"] = x.use_activation;
        },
        layer);
    layers.push_back(l);
  }
  j["layers"] = layers;
  j["param_count"] = param_count(m);
  j["params_file"] = "params.bin";
  return j;
}

/// Rebuilds the structure described by a manifest with zero parameters.
inline NeuralHssModel model_skeleton(const nlohmann::json& j) {
  if (j.value("format", "") != "neural-hss-model") throw IoError("model manifest: wrong format tag");
  if (j.value("version", 0) != 1) throw IoError("model manifest: unsupported version");
  NeuralHssModel m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.init_scale = j.value("init_scale", 1.0);
  if (!j.at("residual_scale").is_null()) m.residual_scale = j.at("residual_scale").get<double>();
  m.input_scale = j.at("input_scale").get<double>();
  m.output_scale = j.at("output_scale").get<double>();
  if (!j.at("lift").is_null()) m.lift = detail::map_from_manifest(j.at("lift"));
  if (!j.at("project").is_null()) m.project = detail::map_from_manifest(j.at("project"));
  for (const auto& l : j.at("layers")) {
    const std::string type = l.at("type").get<std::string>();
    const bool act = l.at("use_activation").get<bool>();
    if (type == "hss") {
      HssLinearLayer x{HssMatrix(ClusterTree(l.at("d").get<std::size_t>(), l.at("levels").get<std::size_t>()),
                                 l.at("rank").get<std::size_t>()),
                       1.0, act};
      m.layers.emplace_back(std::move(x));
    } else if (type == "nd_hss") {
      NdHssLayer x;
      x.modes = l.at("modes").get<std::size_t>();
      x.use_activation = act;
      ClusterTree tree(l.at("d").get<std::size_t>(), l.at("levels").get<std::size_t>());
      for (const auto& row : l.at("ranks")) {
        x.factors.emplace_back();
        for (const auto& r : row) x.factors.back().emplace_back(tree, r.get<std::size_t>());
      }
      if (x.factors.empty() || x.factors[0].size() != x.modes) throw IoError("model manifest: bad nd_hss ranks");
      m.layers.emplace_back(std::move(x));
    } else if (type == "dense") {
      DenseLayer x;
      x.weight = DenseMatrix::Zero(l.at("out").get<Eigen::Index>(), l.at("in").get<Eigen::Index>());
      x.use_activation = act;
      m.layers.emplace_back(std::move(x));
    } else {
      throw IoError("model manifest: unknown layer type '" + type + "'");
    }
  }
  if (param_count(m) != j.at("param_count").get<std::size_t>())
    throw IoError("model manifest: param_count does not match the described structure");
  return m;
}

inline void save_model(const NeuralHssModel& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<double> flat;
  flat.reserve(param_count(m));
  for_each_param(m, [&](std::span<const double> s, ParamKind) { flat.insert(flat.end(), s.begin(), s.end()); });
  write_doubles_le(dir / "params.bin", flat);
  write_text(dir / "model.json", model_manifest(m).dump(2) + "\n");
}

inline NeuralHssModel load_model(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("model manifest " + (dir / "model.json").string() + ": " + e.what());
  }
  NeuralHssModel m;
  try {
    m = model_skeleton(j);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model manifest: ") + e.what());
  }
  const auto flat = read_doubles_le(dir / j.at("params_file").get<std::string>(), param_count(m));
  std::size_t off = 0;
  for_each_param(m, [&](std::span<double> s, ParamKind) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), s.size(), s.begin());
    off += s.size();
  });
  return m;
}

}  // namespace nhss
