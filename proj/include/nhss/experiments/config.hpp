#pragma once

#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhss/experiments/bench.hpp"
#include "nhss/experiments/experiments.hpp"
#include "nhss/experiments/kernel_rank.hpp"
#include "nhss/experiments/plot.hpp"
#include "nhss/pdegen/evolution.hpp"

namespace nhss {

using Json = nlohmann::json;

/// Reads fields out of a JSON object, rejecting keys nobody asked for.
/// Call finish() after the last field.
class JsonReader {
 public:
  JsonReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  /// Nested object read by `f(JsonReader&)`.
  template <class F>
  void object(const std::string& key, F&& f) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    JsonReader sub(j_.at(key), path(key));
    f(sub);
    sub.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(path(k) + ": unknown key");
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }
  const Json& json() const { return j_; }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

// Each config type has to_json(T) and read(JsonReader&, T&). Reading only
// overwrites keys that are present, so defaults survive partial files.

inline Json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},           {"batch_size", c.batch_size},     {"peak_lr", c.peak_lr},
          {"min_lr", c.min_lr},           {"weight_decay", c.weight_decay}, {"beta1", c.beta1},
          {"beta2", c.beta2},             {"eps_adam", c.eps_adam},         {"grad_clip_norm", c.grad_clip_norm},
          {"alpha_penalty", c.alpha_penalty}, {"eval_every", c.eval_every}};
}

inline void read(JsonReader& r, TrainConfig& c) {
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("peak_lr", c.peak_lr);
  r.get("min_lr", c.min_lr);
  r.get("weight_decay", c.weight_decay);
  r.get("beta1", c.beta1);
  r.get("beta2", c.beta2);
  r.get("eps_adam", c.eps_adam);
  r.get("grad_clip_norm", c.grad_clip_norm);
  r.get("alpha_penalty", c.alpha_penalty);
  r.get("eval_every", c.eval_every);
}

inline Json to_json(const ModelConfig& c) {
  return {{"kind", c.kind},
          {"levels", c.levels},
          {"rank", c.rank},
          {"depth", c.depth},
          {"outer_rank", c.outer_rank},
          {"width", c.width},
          {"init_scale", c.init_scale ? Json(*c.init_scale) : Json("gain_matched")},
          {"last_activation", c.last_activation}};
}

inline void read(JsonReader& r, ModelConfig& c) {
  r.get("kind", c.kind);
  r.get("levels", c.levels);
  r.get("rank", c.rank);
  r.get("depth", c.depth);
  r.get("outer_rank", c.outer_rank);
  r.get("width", c.width);
  r.get("last_activation", c.last_activation);
  Json s;
  r.get("init_scale", s);
  if (s.is_string() && s == "gain_matched")
    c.init_scale.reset();
  else if (s.is_number())
    c.init_scale = s.get<double>();
  else if (!s.is_null())
    throw ConfigError(r.path("init_scale") + ": expected a number or \"gain_matched\"");
}

inline Json to_json(const Poisson1dOptions& o) { return {{"fine", o.fine}, {"coarse", o.coarse}, {"modes", o.modes}}; }
inline void read(JsonReader& r, Poisson1dOptions& o) {
  r.get("fine", o.fine);
  r.get("coarse", o.coarse);
  r.get("modes", o.modes);
}

inline Json to_json(const Poisson2dOptions& o) {
  return {{"fine", o.fine}, {"coarse", o.coarse}, {"max_modes", o.max_modes}};
}
inline void read(JsonReader& r, Poisson2dOptions& o) {
  r.get("fine", o.fine);
  r.get("coarse", o.coarse);
  r.get("max_modes", o.max_modes);
}

inline Json to_json(const HeatOptions& o) {
  return {{"fine", o.fine},   {"coarse", o.coarse},   {"modes", o.modes},
          {"kappa", o.kappa}, {"horizon", o.horizon}, {"dt", o.dt}};
}
inline void read(JsonReader& r, HeatOptions& o) {
  r.get("fine", o.fine);
  r.get("coarse", o.coarse);
  r.get("modes", o.modes);
  r.get("kappa", o.kappa);
  r.get("horizon", o.horizon);
  r.get("dt", o.dt);
}

inline Json to_json(const BurgersOptions& o) {
  return {{"fine", o.fine},       {"coarse", o.coarse},   {"modes", o.modes},
          {"nu", o.nu},           {"horizon", o.horizon}, {"dt", o.dt},
          {"dt_internal", o.dt_internal}, {"newton_tol", o.newton_tol}, {"newton_max_iter", o.newton_max_iter}};
}
inline void read(JsonReader& r, BurgersOptions& o) {
  r.get("fine", o.fine);
  r.get("coarse", o.coarse);
  r.get("modes", o.modes);
  r.get("nu", o.nu);
  r.get("horizon", o.horizon);
  r.get("dt", o.dt);
  r.get("dt_internal", o.dt_internal);
  r.get("newton_tol", o.newton_tol);
  r.get("newton_max_iter", o.newton_max_iter);
}

// ------------------------------------------------------------ subcommands

struct RecoveryGenOptions {
  std::size_t d = 32;
  std::size_t levels = 2;
  std::size_t rank = 2;
};

struct GenConfig {
  std::string equation = "poisson1d";  // poisson1d, poisson2d, heat, burgers, recovery
  std::size_t samples = 100;           // pairs, or trajectories for heat/burgers
  Poisson1dOptions poisson1d;
  Poisson2dOptions poisson2d;
  HeatOptions heat;
  BurgersOptions burgers;
  RecoveryGenOptions recovery;

  void validate() const {
    static const std::set<std::string> known = {"poisson1d", "poisson2d", "heat", "burgers", "recovery"};
    if (!known.count(equation))
      throw ConfigError("gen: unknown equation '" + equation + "' (expected poisson1d, poisson2d, heat, burgers or recovery)");
    if (samples == 0) throw ConfigError("gen: samples must be >= 1");
  }
};

inline Json to_json(const GenConfig& c) {
  return {{"equation", c.equation},
          {"samples", c.samples},
          {"poisson1d", to_json(c.poisson1d)},
          {"poisson2d", to_json(c.poisson2d)},
          {"heat", to_json(c.heat)},
          {"burgers", to_json(c.burgers)},
          {"recovery", {{"d", c.recovery.d}, {"levels", c.recovery.levels}, {"rank", c.recovery.rank}}}};
}

inline void read(JsonReader& r, GenConfig& c) {
  r.get("equation", c.equation);
  r.get("samples", c.samples);
  r.object("poisson1d", [&](JsonReader& s) { read(s, c.poisson1d); });
  r.object("poisson2d", [&](JsonReader& s) { read(s, c.poisson2d); });
  r.object("heat", [&](JsonReader& s) { read(s, c.heat); });
  r.object("burgers", [&](JsonReader& s) { read(s, c.burgers); });
  r.object("recovery", [&](JsonReader& s) {
    s.get("d", c.recovery.d);
    s.get("levels", c.recovery.levels);
    s.get("rank", c.recovery.rank);
  });
}

struct TrainCmdConfig {
  std::string dataset;       // training data directory
  std::string test_dataset;  // optional; evaluated every train.eval_every epochs
  std::size_t samples = 0;   // use the first N samples (0 = all)
  bool max_scaling = true;   // steady problems only
  ModelConfig model;
  TrainConfig train;

  void validate() const {
    if (dataset.empty()) throw ConfigError("train: 'dataset' is required");
    model.validate();
    train.validate();
  }
};

inline Json to_json(const TrainCmdConfig& c) {
  return {{"dataset", c.dataset},   {"test_dataset", c.test_dataset},   {"samples", c.samples},
          {"max_scaling", c.max_scaling}, {"model", to_json(c.model)}, {"train", to_json(c.train)}};
}

inline void read(JsonReader& r, TrainCmdConfig& c) {
  r.get("dataset", c.dataset);
  r.get("test_dataset", c.test_dataset);
  r.get("samples", c.samples);
  r.get("max_scaling", c.max_scaling);
  r.object("model", [&](JsonReader& s) { read(s, c.model); });
  r.object("train", [&](JsonReader& s) { read(s, c.train); });
}

struct EvalCmdConfig {
  std::string model;    // model directory
  std::string dataset;  // dataset directory

  void validate() const {
    if (model.empty() || dataset.empty()) throw ConfigError("eval: 'model' and 'dataset' are required");
  }
};

inline Json to_json(const EvalCmdConfig& c) { return {{"model", c.model}, {"dataset", c.dataset}}; }
inline void read(JsonReader& r, EvalCmdConfig& c) {
  r.get("model", c.model);
  r.get("dataset", c.dataset);
}

inline Json to_json(const DataEfficiencyConfig& c) {
  return {{"sizes", c.sizes},       {"test_samples", c.test_samples}, {"repeats", c.repeats},
          {"baseline", c.baseline}, {"dataset", c.dataset},           {"poisson1d", to_json(c.poisson)},
          {"model", to_json(c.model)}, {"train", to_json(c.train)}};
}

inline void read(JsonReader& r, DataEfficiencyConfig& c) {
  r.get("sizes", c.sizes);
  r.get("test_samples", c.test_samples);
  r.get("repeats", c.repeats);
  r.get("baseline", c.baseline);
  r.get("dataset", c.dataset);
  r.object("poisson1d", [&](JsonReader& s) { read(s, c.poisson); });
  r.object("model", [&](JsonReader& s) { read(s, c.model); });
  r.object("train", [&](JsonReader& s) { read(s, c.train); });
}

inline Json to_json(const ExactRecoveryConfig& c) {
  return {{"d", c.d},
          {"levels", c.levels},
          {"rank", c.rank},
          {"model_rank", c.model_rank},
          {"train_samples", c.train_samples},
          {"control_samples", c.control_samples},
          {"test_samples", c.test_samples},
          {"alpha_init", c.alpha_init},
          {"init_scale", c.init_scale},
          {"train", to_json(c.train)}};
}

inline void read(JsonReader& r, ExactRecoveryConfig& c) {
  r.get("d", c.d);
  r.get("levels", c.levels);
  r.get("rank", c.rank);
  r.get("model_rank", c.model_rank);
  r.get("train_samples", c.train_samples);
  r.get("control_samples", c.control_samples);
  r.get("test_samples", c.test_samples);
  r.get("alpha_init", c.alpha_init);
  r.get("init_scale", c.init_scale);
  r.object("train", [&](JsonReader& s) { read(s, c.train); });
}

inline Json to_json(const KernelRankConfig& c) {
  return {{"kernel", c.kernel}, {"n", c.n}, {"depth", c.depth}, {"eta", c.eta}, {"eps", c.eps}};
}
inline void read(JsonReader& r, KernelRankConfig& c) {
  r.get("kernel", c.kernel);
  r.get("n", c.n);
  r.get("depth", c.depth);
  r.get("eta", c.eta);
  r.get("eps", c.eps);
}

inline Json to_json(const BenchConfig& c) {
  return {{"sizes", c.sizes}, {"rank", c.rank}, {"reps", c.reps}, {"warmup", c.warmup}, {"dense", c.dense}};
}
inline void read(JsonReader& r, BenchConfig& c) {
  r.get("sizes", c.sizes);
  r.get("rank", c.rank);
  r.get("reps", c.reps);
  r.get("warmup", c.warmup);
  r.get("dense", c.dense);
}

struct PlotConfig {
  std::string input;
  std::string output;
  std::string x = "x";
  std::string y = "y";
  std::string group;  // column splitting rows into series; empty = one series
  PlotOptions options;

  void validate() const {
    if (input.empty() || output.empty()) throw ConfigError("plot: 'input' and 'output' are required");
  }
};

inline Json to_json(const PlotConfig& c) {
  return {{"input", c.input},          {"output", c.output},          {"x", c.x},
          {"y", c.y},                  {"group", c.group},            {"title", c.options.title},
          {"xlabel", c.options.xlabel}, {"ylabel", c.options.ylabel}, {"logx", c.options.logx},
          {"logy", c.options.logy},    {"width", c.options.width},    {"height", c.options.height}};
}

inline void read(JsonReader& r, PlotConfig& c) {
  r.get("input", c.input);
  r.get("output", c.output);
  r.get("x", c.x);
  r.get("y", c.y);
  r.get("group", c.group);
  r.get("title", c.options.title);
  r.get("xlabel", c.options.xlabel);
  r.get("ylabel", c.options.ylabel);
  r.get("logx", c.options.logx);
  r.get("logy", c.options.logy);
  r.get("width", c.options.width);
  r.get("height", c.options.height);
}

/// Full run configuration: the shared keys plus one subcommand section.
template <class T>
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "out";
  T cmd;
};

template <class T>
Json to_json(const RunConfig<T>& c) {
  Json j = to_json(c.cmd);
  j["seed"] = c.seed;
  j["out"] = c.out;
  return j;
}

template <class T>
RunConfig<T> parse_run_config(const Json& j, const std::string& where = "config") {
  RunConfig<T> c;
  JsonReader r(j, where);
  r.get("seed", c.seed);
  r.get("out", c.out);
  read(r, c.cmd);
  r.finish();
  return c;
}

/// FNV-1a of the canonical JSON text, as 16 hex digits.
inline std::string config_fingerprint(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nhss
