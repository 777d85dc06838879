// Copyright (c) 2026 the hcc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "hcc/gsc.hpp"
#include "hcc/layers.hpp"

namespace hcc {

// Two-layer scorer: Linear(d -> d/4) -> GeLU -> Linear(d/4 -> 1).
template <typename T>
struct ScoreMlp {
  Linear<T> fc1, fc2;
  GeluKind gelu_kind = GeluKind::tanh_approx;

  ScoreMlp() = default;
  ScoreMlp(Rng& rng, std::size_t d, GeluKind kind)
      : fc1(rng, d, std::max<std::size_t>(d / 4, 1)),
        fc2(rng, std::max<std::size_t>(d / 4, 1), 1),
        gelu_kind(kind) {}

  // Raw per-token logits, [m].
  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> h = fc2.forward(gelu(fc1.forward(x), gelu_kind));
    return reshape(h, {x.extent(0)});
  }

  template <typename Sink>
  void visit_params(const std::string& prefix, Sink&& sink) {
    sink(prefix + ".fc1.weight", fc1.weight);
    sink(prefix + ".fc1.bias", fc1.bias);
    sink(prefix + ".fc2.weight", fc2.weight);
    sink(prefix + ".fc2.bias", fc2.bias);
  }
};

// Adaptive detail mining: score tokens by "important but under-attended",
// keep the top K, recompress them with dedicated detail queries, and fuse
// with the global features.
template <typename T>
struct AdmState {
  ScoreMlp<T> mlp1;           // intrinsic importance
  ScoreMlp<T> mlp2;           // selection refinement
  Tensor<T> query;            // [n_d x d]
  PositionalEncoding<T> pos;  // [n_d x d]
  MultiHeadCrossAttention<T> attn;
  Linear<T> fuse;             // d -> d
  LayerNorm<T> fuse_norm;
  T lambda = T(10);           // coverage sharpness, > 0
  T temperature = T(1);       // divisor on selection scores before scaling, > 0
  bool score_scaling = true;  // multiply selected rows by their scores
  bool detach_coverage = true;
  GeluKind gelu_kind = GeluKind::tanh_approx;

  AdmState() = default;
  AdmState(Rng& rng, std::size_t n_d, std::size_t heads, std::size_t d, T lambda_,
           T temperature_, bool score_scaling_, bool detach_coverage_, GeluKind kind)
      : mlp1(rng, d, kind),
        mlp2(rng, d, kind),
        query(xavier_uniform<T>(rng, n_d, d)),
        pos(n_d, d),
        attn(rng, heads, d),
        fuse(rng, d, d),
        fuse_norm(d),
        lambda(lambda_),
        temperature(temperature_),
        score_scaling(score_scaling_),
        detach_coverage(detach_coverage_),
        gelu_kind(kind) {
    if (!(lambda > T(0))) throw ConfigError("adm: lambda must be positive");
    if (!(temperature > T(0))) throw ConfigError("adm: temperature must be positive");
  }

  std::size_t query_count() const { return query.extent(0); }
  std::size_t width() const { return query.extent(1); }

  template <typename Sink>
  void visit_params(const std::string& prefix, Sink&& sink) {
    mlp1.visit_params(prefix + ".mlp1", sink);
    mlp2.visit_params(prefix + ".mlp2", sink);
    sink(prefix + ".query", query);
    sink(prefix + ".pos", pos.table);
    attn.visit_params(prefix + ".attn", sink);
    sink(prefix + ".fuse.weight", fuse.weight);
    sink(prefix + ".fuse.bias", fuse.bias);
    sink(prefix + ".fuse_norm.gain", fuse_norm.gain);
    sink(prefix + ".fuse_norm.offset", fuse_norm.offset);
  }
};

// Total attention mass each input token received, summed over heads and
// queries: cov[t] = sum_i sum_j A[i, j, t]. The stack must hold normalized
// softmax rows, so the result sums to H * n_g.
template <typename T>
Tensor<T> coverage(const Tensor<T>& attention_stack) {
  if (attention_stack.ndim() != 3) {
    throw DimensionError("coverage: expects [H x n_g x m], got " + shape_str(attention_stack.shape()));
  }
  for (T v : attention_stack.data()) {
    if (v < T(0)) throw InputError("coverage: negative attention weight");
  }
  return reduce_sum(reduce_sum(attention_stack, 0), 0);
}

// I = sigmoid(MLP1(X)), one score in (0, 1) per token.
template <typename T>
Tensor<T> importance(const AdmState<T>& state, const Tensor<T>& x) {
  return sigmoid(state.mlp1.forward(x));
}

// S_c = I * (1 - sigmoid(lambda * cov)): high for tokens the global stage
// under-attended but the scorer considers intrinsically important. Coverage
// is treated as a measurement, so by default gradients do not flow back
// through it.
template <typename T>
Tensor<T> complementary_score(const Tensor<T>& importance_scores, const Tensor<T>& cov, T lambda,
                              bool detach_cov = true) {
  detail::check_same_shape(importance_scores, cov, "complementary_score");
  if (!(lambda > T(0))) throw ConfigError("complementary_score: lambda must be positive");
  for (T v : cov.data()) {
    if (v < T(0)) throw InputError("complementary_score: negative coverage");
  }
  Tensor<T> gate = detach_cov ? cov.detach() : cov;
  return mul(importance_scores, affine(sigmoid(affine(gate, lambda, T(0))), T(-1), T(1)));
}

// S_sel = S_c * sigmoid(MLP2(X)).
template <typename T>
Tensor<T> selection_score(const AdmState<T>& state, const Tensor<T>& s_c, const Tensor<T>& x) {
  if (s_c.ndim() != 1 || s_c.size() != x.extent(0)) {
    throw DimensionError("selection_score: scores " + shape_str(s_c.shape()) +
                         " do not match tokens " + shape_str(x.shape()));
  }
  return mul(s_c, sigmoid(state.mlp2.forward(x)));
}

template <typename T>
struct DetailFeatures {
  Tensor<T> features;                 // [n_d x d]
  std::vector<std::size_t> selected;  // ascending token indices, length K
};

// Gather the top-K tokens by selection score and recompress them with the
// detail queries. When score scaling is on, each selected row is multiplied
// by its (temperature-divided) score first; the hard Top-K itself never
// carries gradient, so this is what trains the scorers.
template <typename T>
DetailFeatures<T> select_and_compress(const AdmState<T>& state, const Tensor<T>& s_sel,
                                      const Tensor<T>& x, std::size_t k) {
  if (x.ndim() != 2 || s_sel.ndim() != 1 || s_sel.size() != x.extent(0)) {
    throw DimensionError("select_and_compress: scores " + shape_str(s_sel.shape()) +
                         " do not match tokens " + shape_str(x.shape()));
  }
  const std::size_t m = x.extent(0);
  if (k > m) {
    throw ConfigError("select_and_compress: K = " + std::to_string(k) + " exceeds token count m = " +
                      std::to_string(m));
  }
  if (k < state.query_count()) {
    throw ConfigError("select_and_compress: K = " + std::to_string(k) + " below n_d = " +
                      std::to_string(state.query_count()));
  }
  TopK<T> top = topk(s_sel, k);
  Tensor<T> x_sel = gather_rows(x, top.indices);
  if (state.score_scaling) {
    Tensor<T> s = gather_elems(s_sel, top.indices);
    x_sel = row_scale(x_sel, affine(s, T(1) / state.temperature, T(0)));
  }
  Tensor<T> queries = add(state.query, state.pos.table);
  AttentionOutput<T> out = state.attn.forward(queries, x_sel);
  return {out.features, std::move(top.indices)};
}

// Every intermediate of one compression pass, for inspection and testing.
template <typename T>
struct CompressionTrace {
  Tensor<T> a_cov;               // [m] coverage
  Tensor<T> importance_scores;   // [m] sigmoid(MLP1)
  Tensor<T> s_c;                 // [m] complementary score
  Tensor<T> s_sel;               // [m] selection score
  std::vector<std::size_t> selected;  // ascending, length K
  Tensor<T> f_g;                 // [n_g x d]
  Tensor<T> f_d;                 // [n_d x d]
  Tensor<T> z;                   // [(n_g + n_d) x d]
};

// Fusion tail shared by every mode: per-token Linear(d -> d), GeLU, LayerNorm.
template <typename T>
Tensor<T> fuse_tokens(const AdmState<T>& state, const Tensor<T>& tokens) {
  if (tokens.ndim() != 2 || tokens.extent(1) != state.width()) {
    throw DimensionError("fuse: tokens " + shape_str(tokens.shape()) + " must have width " +
                         std::to_string(state.width()));
  }
  return state.fuse_norm.forward(gelu(state.fuse.forward(tokens), state.gelu_kind));
}

// Z = LayerNorm(GeLU(W_fuse [F_g; F_d] + b)), global rows first.
template <typename T>
Tensor<T> fuse(const AdmState<T>& state, const Tensor<T>& f_g, const Tensor<T>& f_d) {
  if (f_g.ndim() != 2 || f_d.ndim() != 2 || f_g.extent(1) != f_d.extent(1)) {
    throw DimensionError("fuse: width mismatch " + shape_str(f_g.shape()) + " vs " +
                         shape_str(f_d.shape()));
  }
  return fuse_tokens(state, concat(0, std::vector<Tensor<T>>{f_g, f_d}));
}

}  // namespace hcc
