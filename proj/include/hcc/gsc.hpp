// Copyright (c) 2026 the hcc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "hcc/layers.hpp"

namespace hcc {

// Global structure compression: a bank of trainable queries cross-attends to
// the full token sequence and squeezes it to n_g tokens. The attention stack
// is returned alongside the features; detail mining reads it as a coverage
// signal.
template <typename T>
struct GscState {
  Tensor<T> query;            // [n_g x d]
  PositionalEncoding<T> pos;  // [n_g x d]
  MultiHeadCrossAttention<T> attn;

  GscState() = default;
  GscState(Rng& rng, std::size_t n_g, std::size_t heads, std::size_t d)
      : query(xavier_uniform<T>(rng, n_g, d)), pos(n_g, d), attn(rng, heads, d) {}

  std::size_t query_count() const { return query.extent(0); }
  std::size_t width() const { return query.extent(1); }

  template <typename Sink>
  void visit_params(const std::string& prefix, Sink&& sink) {
    sink(prefix + ".query", query);
    sink(prefix + ".pos", pos.table);
    attn.visit_params(prefix + ".attn", sink);
  }
};

// features: [n_g x d], weights: [H x n_g x m]. Requires m > n_g; compressing
// into at least as many tokens as came in is a configuration mistake.
template <typename T>
AttentionOutput<T> gsc_forward(const GscState<T>& state, const Tensor<T>& x) {
  if (x.ndim() != 2 || x.extent(1) != state.width()) {
    throw DimensionError("gsc_forward: input " + shape_str(x.shape()) + " must be [m x " +
                         std::to_string(state.width()) + "]");
  }
  if (x.extent(0) <= state.query_count()) {
    throw InputError("gsc_forward: m = " + std::to_string(x.extent(0)) +
                     " must exceed n_g = " + std::to_string(state.query_count()));
  }
  if (!x.all_finite()) throw InputError("gsc_forward: non-finite input feature");
  Tensor<T> queries = add(state.query, state.pos.table);
  return state.attn.forward(queries, x);
}

}  // namespace hcc
