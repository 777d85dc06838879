// Copyright (c) 2026 the hcc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hcc/adm.hpp"
#include "hcc/gsc.hpp"
#include "hcc/io.hpp"

namespace hcc {

// Every dimension and switch of the compression module. m (the incoming
// token count) is a property of each input, not of the config.
struct HccConfig {
  std::size_t d_init = 16;  // encoder feature width
  std::size_t d = 64;       // module width
  std::size_t heads = 4;    // H
  std::size_t n_g = 8;      // global queries
  std::size_t n_d = 4;      // detail queries
  std::size_t k = 16;       // Top-K budget
  double lambda = 10.0;     // coverage sharpness
  double temperature = 0.1; // divisor on selection scores before Top-K
  bool score_scaling = true;
  bool detach_coverage = true;
  bool proj_mlp = false;    // two-layer input projection instead of one Linear
  GeluKind gelu_variant = GeluKind::tanh_approx;
  std::uint64_t seed = 1;

  // Defaults above are the desk scale; this is the published operating point.
  static HccConfig paper() {
    HccConfig c;
    c.d_init = 384;
    c.d = 2560;
    c.heads = 8;
    c.n_g = 8;
    c.n_d = 4;
    c.k = 96;
    return c;
  }

  static HccConfig desk() { return HccConfig{}; }

  std::size_t output_tokens() const { return n_g + n_d; }

  void validate() const {
    if (d_init < 1) throw ConfigError("config: d_init must be >= 1");
    if (d < 1) throw ConfigError("config: d must be >= 1");
    if (heads < 1) throw ConfigError("config: H must be >= 1");
    if (d % heads != 0) {
      throw ConfigError("config: d not divisible by H (d = " + std::to_string(d) + ", H = " +
                        std::to_string(heads) + ")");
    }
    if (n_g < 1) throw ConfigError("config: n_g must be >= 1");
    if (n_d < 1) throw ConfigError("config: n_d must be >= 1");
    if (k < n_d) {
      throw ConfigError("config: K = " + std::to_string(k) + " must be >= n_d = " + std::to_string(n_d));
    }
    if (!(lambda > 0)) throw ConfigError("config: lambda must be positive");
    if (!(temperature > 0)) throw ConfigError("config: temperature must be positive");
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"d_init", d_init},
                          {"d", d},
                          {"H", heads},
                          {"n_g", n_g},
                          {"n_d", n_d},
                          {"K", k},
                          {"lambda", lambda},
                          {"temperature", temperature},
                          {"score_scaling", score_scaling},
                          {"detach_coverage", detach_coverage},
                          {"proj_mlp", proj_mlp},
                          {"gelu_variant", gelu_variant == GeluKind::exact_erf ? "erf" : "tanh"},
                          {"seed", seed}};
  }

  static HccConfig from_json(const nlohmann::json& j) { return from_json(j, HccConfig{}); }

  // Fields present in `j` override `base`; unknown keys are rejected.
  static HccConfig from_json(const nlohmann::json& j, HccConfig base) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "d_init") base.d_init = value.get<std::size_t>();
      else if (key == "d") base.d = value.get<std::size_t>();
      else if (key == "H") base.heads = value.get<std::size_t>();
      else if (key == "n_g") base.n_g = value.get<std::size_t>();
      else if (key == "n_d") base.n_d = value.get<std::size_t>();
      else if (key == "K") base.k = value.get<std::size_t>();
      else if (key == "lambda") base.lambda = value.get<double>();
      else if (key == "temperature") base.temperature = value.get<double>();
      else if (key == "score_scaling") base.score_scaling = value.get<bool>();
      else if (key == "detach_coverage") base.detach_coverage = value.get<bool>();
      else if (key == "proj_mlp") base.proj_mlp = value.get<bool>();
      else if (key == "gelu_variant") {
        const std::string v = value.get<std::string>();
        if (v == "tanh") base.gelu_variant = GeluKind::tanh_approx;
        else if (v == "erf") base.gelu_variant = GeluKind::exact_erf;
        else throw ConfigError("config: gelu_variant must be \"tanh\" or \"erf\", got \"" + v + "\"");
      } else if (key == "seed") {
        base.seed = value.get<std::uint64_t>();
      } else {
        throw ConfigError("config: unknown key \"" + key + "\"");
      }
    }
    return base;
  }
};

enum class Mode { both, gsc_only, adm_only };

inline Mode mode_from_string(const std::string& s) {
  if (s == "both") return Mode::both;
  if (s == "gsc_only") return Mode::gsc_only;
  if (s == "adm_only") return Mode::adm_only;
  throw ConfigError("unknown mode \"" + s + "\"");
}

inline std::string mode_to_string(Mode m) {
  switch (m) {
    case Mode::both: return "both";
    case Mode::gsc_only: return "gsc_only";
    default: return "adm_only";
  }
}

// Detail-branch selection strategies for the ablation harness. Pass-through
// strategies (select_all, random) skip scoring and the detail-query
// recompression; their selected rows feed fusion directly.
enum class SelectionStrategy { full, select_all, random, attention_only, mlp_only };

inline SelectionStrategy strategy_from_string(const std::string& s) {
  if (s == "full") return SelectionStrategy::full;
  if (s == "select_all") return SelectionStrategy::select_all;
  if (s == "random") return SelectionStrategy::random;
  if (s == "attention_only") return SelectionStrategy::attention_only;
  if (s == "mlp_only") return SelectionStrategy::mlp_only;
  throw ConfigError("unknown selection strategy \"" + s + "\"");
}

inline std::string strategy_to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::full: return "full";
    case SelectionStrategy::select_all: return "select_all";
    case SelectionStrategy::random: return "random";
    case SelectionStrategy::attention_only: return "attention_only";
    default: return "mlp_only";
  }
}

template <typename T>
struct HccModule {
  HccConfig config;
  Linear<T> proj;
  Linear<T> proj2;  // used only when config.proj_mlp
  GscState<T> gsc;
  AdmState<T> adm;
  std::vector<std::pair<std::string, Tensor<T>>> registry;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : registry) n += t.size();
    return n;
  }

  const Tensor<T>* find_param(const std::string& name) const {
    for (const auto& [n, t] : registry) {
      if (n == name) return &t;
    }
    return nullptr;
  }

  void zero_grad() {
    for (auto& [name, t] : registry) t.zero_grad();
  }
};

// Deterministic construction: one PCG stream, consumed in declaration order.
template <typename T>
HccModule<T> build(const HccConfig& config) {
  config.validate();
  HccModule<T> m;
  m.config = config;
  Rng rng(config.seed);
  m.proj = Linear<T>(rng, config.d_init, config.d);
  if (config.proj_mlp) m.proj2 = Linear<T>(rng, config.d, config.d);
  m.gsc = GscState<T>(rng, config.n_g, config.heads, config.d);
  m.adm = AdmState<T>(rng, config.n_d, config.heads, config.d, static_cast<T>(config.lambda),
                      static_cast<T>(config.temperature), config.score_scaling,
                      config.detach_coverage, config.gelu_variant);

  auto sink = [&m](const std::string& name, Tensor<T>& t) { m.registry.emplace_back(name, t); };
  sink("proj.weight", m.proj.weight);
  sink("proj.bias", m.proj.bias);
  if (config.proj_mlp) {
    sink("proj2.weight", m.proj2.weight);
    sink("proj2.bias", m.proj2.bias);
  }
  m.gsc.visit_params("gsc", sink);
  m.adm.visit_params("adm", sink);
  return m;
}

// Encoder features -> module width.
template <typename T>
Tensor<T> project(const HccModule<T>& m, const Tensor<T>& x_init) {
  if (x_init.ndim() != 2 || x_init.extent(1) != m.config.d_init) {
    throw DimensionError("project: input " + shape_str(x_init.shape()) + " must be [m x " +
                         std::to_string(m.config.d_init) + "]");
  }
  Tensor<T> x = m.proj.forward(x_init);
  if (m.config.proj_mlp) x = m.proj2.forward(gelu(x, m.config.gelu_variant));
  return x;
}

template <typename T>
struct ForwardResult {
  Tensor<T> z;
  CompressionTrace<T> trace;
};

namespace detail {

template <typename T>
void check_forward_input(const HccModule<T>& m, const Tensor<T>& x_init) {
  if (x_init.ndim() != 2 || x_init.extent(1) != m.config.d_init) {
    throw DimensionError("hcc_forward: input " + shape_str(x_init.shape()) + " must be [m x " +
                         std::to_string(m.config.d_init) + "]");
  }
  if (!x_init.all_finite()) throw InputError("hcc_forward: non-finite input feature");
  if (m.config.k > x_init.extent(0)) {
    throw ConfigError("hcc_forward: K = " + std::to_string(m.config.k) +
                      " exceeds token count m = " + std::to_string(x_init.extent(0)));
  }
}

}  // namespace detail

// Full pipeline: project -> GSC -> coverage/importance/scores -> Top-K ->
// detail compression -> fusion. The trace captures every intermediate.
template <typename T>
ForwardResult<T> hcc_forward(const HccModule<T>& m, const Tensor<T>& x_init) {
  detail::check_forward_input(m, x_init);
  Tensor<T> x = project(m, x_init);
  AttentionOutput<T> global = gsc_forward(m.gsc, x);
  Tensor<T> cov = coverage(global.weights);
  Tensor<T> imp = importance(m.adm, x);
  Tensor<T> s_c = complementary_score(imp, cov, m.adm.lambda, m.adm.detach_coverage);
  Tensor<T> s_sel = selection_score(m.adm, s_c, x);
  DetailFeatures<T> det = select_and_compress(m.adm, s_sel, x, m.config.k);
  Tensor<T> z = fuse(m.adm, global.features, det.features);
  CompressionTrace<T> trace{cov, imp, s_c, s_sel, det.selected, global.features, det.features, z};
  return {z, std::move(trace)};
}

// Tab-5-style single-module variants. adm_only has no attention stack to
// measure, so every token gets the uniform coverage H * n_g / m.
template <typename T>
Tensor<T> ablation_forward(const HccModule<T>& m, const Tensor<T>& x_init, Mode mode) {
  if (mode == Mode::both) return hcc_forward(m, x_init).z;
  detail::check_forward_input(m, x_init);
  Tensor<T> x = project(m, x_init);
  if (mode == Mode::gsc_only) {
    AttentionOutput<T> global = gsc_forward(m.gsc, x);
    return fuse_tokens(m.adm, global.features);
  }
  const std::size_t tokens = x.extent(0);
  const T uniform_cov = static_cast<T>(static_cast<double>(m.config.heads * m.config.n_g) /
                                       static_cast<double>(tokens));
  Tensor<T> cov = Tensor<T>::full({tokens}, uniform_cov);
  Tensor<T> imp = importance(m.adm, x);
  Tensor<T> s_c = complementary_score(imp, cov, m.adm.lambda, m.adm.detach_coverage);
  Tensor<T> s_sel = selection_score(m.adm, s_c, x);
  DetailFeatures<T> det = select_and_compress(m.adm, s_sel, x, m.config.k);
  return fuse_tokens(m.adm, det.features);
}

template <typename T>
struct StrategyResult {
  Tensor<T> z;
  std::size_t detail_tokens = 0;
  std::vector<std::size_t> selected;
};

// Forward pass with one of the Tab-7 selection strategies in the detail
// branch. `random_count` and `random_seed` only matter for the random
// strategy.
template <typename T>
StrategyResult<T> strategy_forward(const HccModule<T>& m, const Tensor<T>& x_init,
                                   SelectionStrategy strategy, std::size_t random_count = 24,
                                   std::uint64_t random_seed = 0) {
  if (strategy == SelectionStrategy::full) {
    ForwardResult<T> r = hcc_forward(m, x_init);
    return {r.z, m.config.n_d, std::move(r.trace.selected)};
  }
  detail::check_forward_input(m, x_init);
  Tensor<T> x = project(m, x_init);
  AttentionOutput<T> global = gsc_forward(m.gsc, x);
  const std::size_t tokens = x.extent(0);

  if (strategy == SelectionStrategy::select_all) {
    // No scoring signal: pass the first K tokens straight to fusion.
    std::vector<std::size_t> sel(m.config.k);
    std::iota(sel.begin(), sel.end(), std::size_t{0});
    Tensor<T> picked = gather_rows(x, sel);
    return {fuse(m.adm, global.features, picked), m.config.k, std::move(sel)};
  }
  if (strategy == SelectionStrategy::random) {
    if (random_count < 1 || random_count > tokens) {
      throw ConfigError("strategy_forward: random_count = " + std::to_string(random_count) +
                        " outside [1, m]");
    }
    // Seeded Fisher-Yates prefix, then ascending order.
    std::vector<std::size_t> perm(tokens);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(random_seed);
    for (std::size_t i = 0; i < random_count; ++i) {
      const std::size_t j = i + rng.index(tokens - i);
      std::swap(perm[i], perm[j]);
    }
    std::vector<std::size_t> sel(perm.begin(), perm.begin() + random_count);
    std::sort(sel.begin(), sel.end());
    Tensor<T> picked = gather_rows(x, sel);
    return {fuse(m.adm, global.features, picked), random_count, std::move(sel)};
  }

  // Single-signal scored strategies keep the Top-K + detail-query path.
  Tensor<T> score;
  if (strategy == SelectionStrategy::attention_only) {
    Tensor<T> cov = coverage(global.weights);
    Tensor<T> gate = m.adm.detach_coverage ? cov.detach() : cov;
    score = affine(sigmoid(affine(gate, m.adm.lambda, T(0))), T(-1), T(1));
  } else {  // mlp_only
    score = importance(m.adm, x);
  }
  DetailFeatures<T> det = select_and_compress(m.adm, score, x, m.config.k);
  return {fuse(m.adm, global.features, det.features), m.config.n_d, std::move(det.selected)};
}

// ---------------------------------------------------------------------------
// Checkpoints: directory of one .hcct per parameter plus manifest.json.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
constexpr const char* dtype_name() {
  return std::is_same_v<T, float> ? "f32" : "f64";
}

inline nlohmann::json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream f(path);
  if (!f) throw FormatError(std::string(what) + ": cannot open " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string(what) + ": invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f << text;
}

}  // namespace detail

template <typename T>
void save(const HccModule<T>& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : m.registry) {
    const std::string file = name + ".hcct";
    hcct::save(t, dir / file);
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"file", file}});
  }
  nlohmann::json manifest{{"format", "hcc-checkpoint"},
                          {"version", 1},
                          {"dtype", detail::dtype_name<T>()},
                          {"config", m.config.to_json()},
                          {"tensors", tensors}};
  detail::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

template <typename T>
HccModule<T> load(const std::filesystem::path& dir) {
  const nlohmann::json manifest = detail::read_json_file(dir / "manifest.json", "checkpoint");
  if (manifest.value("format", "") != "hcc-checkpoint") {
    throw FormatError("checkpoint: " + (dir / "manifest.json").string() + " is not a checkpoint manifest");
  }
  if (manifest.value("version", -1) != 1) {
    throw FormatError("checkpoint: unsupported manifest version");
  }
  if (manifest.value("dtype", "") != detail::dtype_name<T>()) {
    throw FormatError("checkpoint: dtype " + manifest.value("dtype", "?") +
                      " does not match requested element type " + detail::dtype_name<T>());
  }
  HccModule<T> m = build<T>(HccConfig::from_json(manifest.at("config")));
  std::size_t loaded = 0;
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    Tensor<T>* param = nullptr;
    for (auto& [n, t] : m.registry) {
      if (n == name) param = &t;
    }
    if (!param) throw FormatError("checkpoint: unknown parameter \"" + name + "\" in manifest");
    const Shape declared = entry.at("shape").get<Shape>();
    Tensor<T> value = hcct::load<T>(dir / entry.at("file").get<std::string>());
    if (value.shape() != declared || value.shape() != param->shape()) {
      throw FormatError("checkpoint: shape mismatch for parameter \"" + name + "\": manifest " +
                        shape_str(declared) + ", file " + shape_str(value.shape()) + ", module " +
                        shape_str(param->shape()));
    }
    param->mutable_data() = value.data();
    ++loaded;
  }
  if (loaded != m.registry.size()) {
    throw FormatError("checkpoint: manifest lists " + std::to_string(loaded) +
                      " tensors, module has " + std::to_string(m.registry.size()));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Trace serialization: directory of HCCT tensors plus a JSON index.
// ---------------------------------------------------------------------------

template <typename T>
void save_trace(const CompressionTrace<T>& trace, const HccConfig& config,
                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, const Tensor<T>*>> tensors = {
      {"a_cov", &trace.a_cov},   {"importance", &trace.importance_scores},
      {"s_c", &trace.s_c},       {"s_sel", &trace.s_sel},
      {"f_g", &trace.f_g},       {"f_d", &trace.f_d},
      {"z", &trace.z}};
  nlohmann::json index_tensors = nlohmann::json::object();
  for (const auto& [name, t] : tensors) {
    const std::string file = name + ".hcct";
    hcct::save(t->detach(), dir / file);
    index_tensors[name] = file;
  }
  const std::size_t m = trace.a_cov.size();
  nlohmann::json index{{"format", "hcc-trace"},
                       {"version", 1},
                       {"dtype", detail::dtype_name<T>()},
                       {"selected", trace.selected},
                       {"tokens_in", m},
                       {"tokens_out", trace.z.extent(0)},
                       {"hyperparameters", config.to_json()},
                       {"tensors", index_tensors}};
  detail::write_text_file(dir / "trace.json", index.dump(2) + "\n");
}

}  // namespace hcc
