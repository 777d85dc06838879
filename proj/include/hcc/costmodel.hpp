// Copyright (c) 2026 the hcc authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic cost model. "FLOPs" throughout this module counts multiply-
// accumulate operations of the dense products, the convention the formulas
// below are written in; element-wise work (norms, activations, softmax) is
// excluded. Latency is modeled as proportional to these counts.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcc/pipeline.hpp"

namespace hcc {

// Decoder-only transformer dimensions standing in for the language model.
struct CostModelSpec {
  std::uint64_t layers = 32;             // L
  std::uint64_t hidden = 2560;           // h
  std::uint64_t ffn_mult = 4;            // r
  std::uint64_t heads = 32;              // attention heads (shape bookkeeping only)
  std::uint64_t prompt_text_tokens = 64; // text tokens alongside the visual ones

  void validate() const {
    if (layers < 1) throw ConfigError("cost spec: layers must be >= 1");
    if (hidden < 1) throw ConfigError("cost spec: hidden must be >= 1");
    if (ffn_mult < 1) throw ConfigError("cost spec: ffn_mult must be >= 1");
    if (heads < 1) throw ConfigError("cost spec: heads must be >= 1");
    if (prompt_text_tokens < 1) throw ConfigError("cost spec: prompt_text_tokens must be >= 1");
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"layers", layers},
                          {"hidden", hidden},
                          {"ffn_mult", ffn_mult},
                          {"heads", heads},
                          {"prompt_text_tokens", prompt_text_tokens}};
  }

  static CostModelSpec from_json(const nlohmann::json& j) { return from_json(j, CostModelSpec{}); }
  static CostModelSpec from_json(const nlohmann::json& j, CostModelSpec base) {
    if (!j.is_object()) throw ConfigError("cost spec: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "layers") base.layers = value.get<std::uint64_t>();
      else if (key == "hidden") base.hidden = value.get<std::uint64_t>();
      else if (key == "ffn_mult") base.ffn_mult = value.get<std::uint64_t>();
      else if (key == "heads") base.heads = value.get<std::uint64_t>();
      else if (key == "prompt_text_tokens") base.prompt_text_tokens = value.get<std::uint64_t>();
      else throw ConfigError("cost spec: unknown key \"" + key + "\"");
    }
    return base;
  }
};

// Prefill over t tokens:
//   per layer, attention projections 4*t*h^2, score/value products 2*t^2*h,
//   feed-forward 2*r*t*h^2; total = L * (4*t*h^2 + 2*t^2*h + 2*r*t*h^2).
inline std::uint64_t prefill_flops(const CostModelSpec& spec, std::uint64_t tokens) {
  spec.validate();
  if (tokens < 1) throw ConfigError("prefill_flops: tokens must be >= 1");
  const std::uint64_t h = spec.hidden;
  return spec.layers * (4 * tokens * h * h + 2 * tokens * tokens * h +
                        2 * spec.ffn_mult * tokens * h * h);
}

// One generated token with a prompt of `prompt_tokens` already cached:
// projections and FFN for a single position plus attention over the cache.
inline std::uint64_t decode_flops(const CostModelSpec& spec, std::uint64_t prompt_tokens,
                                  std::uint64_t new_tokens) {
  spec.validate();
  const std::uint64_t h = spec.hidden;
  std::uint64_t total = 0;
  for (std::uint64_t s = 0; s < new_tokens; ++s) {
    total += spec.layers * (4 * h * h + 2 * spec.ffn_mult * h * h + 2 * (prompt_tokens + s + 1) * h);
  }
  return total;
}

// Per-stage multiply-accumulate counts of the compression module on an
// m-token input, derived from the layer shapes.
struct HccFlops {
  std::uint64_t projection = 0;
  std::uint64_t gsc_attention = 0;
  std::uint64_t scorers = 0;
  std::uint64_t detail_attention = 0;
  std::uint64_t fusion = 0;

  std::uint64_t total() const {
    return projection + gsc_attention + scorers + detail_attention + fusion;
  }
};

inline HccFlops hcc_module_flops(const HccConfig& config, std::uint64_t m) {
  config.validate();
  if (m < 1) throw ConfigError("hcc_module_flops: m must be >= 1");
  const std::uint64_t d = config.d, di = config.d_init, ng = config.n_g, nd = config.n_d,
                      k = config.k;
  const std::uint64_t hidden = std::max<std::uint64_t>(d / 4, 1);
  HccFlops f;
  f.projection = m * di * d + (config.proj_mlp ? m * d * d : 0);
  // q/k/v/o projections plus score and value products across all heads
  f.gsc_attention = ng * d * d + 2 * m * d * d + ng * m * d + ng * m * d + ng * d * d;
  f.scorers = 2 * (m * d * hidden + m * hidden);
  f.detail_attention = nd * d * d + 2 * k * d * d + nd * k * d + nd * k * d + nd * d * d;
  f.fusion = (ng + nd) * d * d;
  return f;
}

// Analytic stand-in for the toy feature encoder: farthest-point sampling
// distances (3 MACs each), neighborhood distance checks (3 MACs each), and
// the 7-channel descriptor projection.
inline std::uint64_t encoder_surrogate_flops(std::uint64_t points, std::uint64_t m,
                                             std::uint64_t d_init) {
  return 3 * points * m + 3 * points * m + 7 * m * d_init;
}

struct StageShares {
  std::uint64_t encoder = 0;
  std::uint64_t hcc_module = 0;  // zero in the uncompressed pipeline
  std::uint64_t prefill = 0;

  std::uint64_t total() const { return encoder + hcc_module + prefill; }
  double encoder_share() const { return double(encoder) / double(total()); }
  double hcc_share() const { return double(hcc_module) / double(total()); }
  double prefill_share() const { return double(prefill) / double(total()); }
};

// Cost comparison between feeding all m_in visual tokens to the language
// model and compressing them to n_g + n_d first.
struct CostReport {
  CostModelSpec spec;
  HccConfig config;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
  std::uint64_t text_tokens = 0;
  std::uint64_t encoder_points = 512;  // P assumed by the encoder stand-in
  double token_reduction = 0;          // 1 - out/in
  StageShares uncompressed;            // visual tokens = tokens_in, no module
  StageShares compressed;              // visual tokens = tokens_out, module included
  double prefill_flop_ratio = 0;       // compressed / uncompressed prefill
  double total_flop_ratio = 0;         // compressed / uncompressed pipeline
  double module_overhead_share = 0;    // module / compressed pipeline
  std::uint64_t decode_tokens = 0;     // 0 = decode excluded

  nlohmann::json to_json() const;
};

inline CostReport compare(const CostModelSpec& spec, const HccConfig& config, std::uint64_t m_in,
                          std::uint64_t text_tokens, std::uint64_t decode_tokens = 0) {
  spec.validate();
  config.validate();
  if (m_in < 1) throw ConfigError("compare: m_in must be >= 1");
  CostReport r;
  r.spec = spec;
  r.config = config;
  r.tokens_in = m_in;
  r.tokens_out = config.output_tokens();
  r.text_tokens = text_tokens;
  r.token_reduction = 1.0 - double(r.tokens_out) / double(m_in);
  r.decode_tokens = decode_tokens;

  const std::uint64_t enc = encoder_surrogate_flops(r.encoder_points, m_in, config.d_init);
  r.uncompressed.encoder = enc;
  r.uncompressed.prefill = prefill_flops(spec, text_tokens + m_in) +
                           (decode_tokens ? decode_flops(spec, text_tokens + m_in, decode_tokens) : 0);

  r.compressed.encoder = enc;
  r.compressed.hcc_module = hcc_module_flops(config, m_in).total();
  r.compressed.prefill = prefill_flops(spec, text_tokens + r.tokens_out) +
                         (decode_tokens ? decode_flops(spec, text_tokens + r.tokens_out, decode_tokens) : 0);

  r.prefill_flop_ratio = double(r.compressed.prefill) / double(r.uncompressed.prefill);
  r.total_flop_ratio = double(r.compressed.total()) / double(r.uncompressed.total());
  r.module_overhead_share = r.compressed.hcc_share();
  return r;
}

inline nlohmann::json CostReport::to_json() const {
  auto stages = [](const StageShares& s, bool with_module) {
    nlohmann::json flops{{"encoder", s.encoder}, {"prefill", s.prefill}};
    nlohmann::json shares{{"encoder", s.encoder_share()}, {"prefill", s.prefill_share()}};
    if (with_module) {
      flops["hcc_module"] = s.hcc_module;
      shares["hcc_module"] = s.hcc_share();
    }
    return nlohmann::json{{"flops", flops}, {"shares", shares}, {"total", s.total()}};
  };
  return nlohmann::json{
      {"spec", spec.to_json()},
      {"config", config.to_json()},
      {"tokens", nlohmann::json{{"in", tokens_in},
                                {"out", tokens_out},
                                {"text", text_tokens},
                                {"reduction", token_reduction}}},
      {"uncompressed", stages(uncompressed, false)},
      {"compressed", stages(compressed, true)},
      {"ratios", nlohmann::json{{"token_reduction", token_reduction},
                                {"prefill_flops", prefill_flop_ratio},
                                {"total_flops", total_flop_ratio},
                                {"module_overhead_share", module_overhead_share}}},
      {"decode_tokens", decode_tokens}};
}

// One CSV row per requested visual-token count: tokens, prefill FLOPs at
// text + tokens, pipeline total with the module included.
inline std::string cost_csv(const CostModelSpec& spec, const HccConfig& config,
                            std::uint64_t m_in, std::uint64_t text_tokens,
                            const std::vector<std::uint64_t>& token_settings) {
  std::string csv = "visual_tokens,prefill_flops,module_flops,total_flops\n";
  const std::uint64_t enc = encoder_surrogate_flops(512, m_in, config.d_init);
  for (std::uint64_t t : token_settings) {
    const std::uint64_t pf = prefill_flops(spec, text_tokens + t);
    const std::uint64_t module = t == m_in ? 0 : hcc_module_flops(config, m_in).total();
    csv += std::to_string(t) + "," + std::to_string(pf) + "," + std::to_string(module) + "," +
           std::to_string(enc + module + pf) + "\n";
  }
  return csv;
}

}  // namespace hcc
