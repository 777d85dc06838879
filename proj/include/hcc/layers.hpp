// Copyright (c) 2026 the hcc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hcc/ops.hpp"
#include "hcc/random.hpp"
#include "hcc/tensor.hpp"

namespace hcc {

// Xavier/Glorot uniform fan-in/fan-out initialization: U[-a, a] with
// a = sqrt(6 / (in + out)).
template <typename T>
Tensor<T> xavier_uniform(Rng& rng, std::size_t out, std::size_t in, bool requires_grad = true) {
  if (out < 1 || in < 1) throw ConfigError("xavier_uniform: fan sizes must be >= 1");
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  return uniform_tensor<T>(rng, {out, in}, -a, a, requires_grad);
}

// Interleaved sin/cos table at geometrically spaced frequencies (base 10000):
// table[p, 2k] = sin(p * w_k), table[p, 2k+1] = cos(p * w_k), w_k = 10000^(-2k/d).
template <typename T>
Tensor<T> sinusoidal_init(std::size_t n, std::size_t d, bool requires_grad = false) {
  if (d % 2 != 0) throw ConfigError("sinusoidal_init: d must be even, got " + std::to_string(d));
  Tensor<T> table({n, d}, requires_grad);
  auto& data = table.mutable_data();
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; 2 * k < d; ++k) {
      const double w = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(d));
      data[p * d + 2 * k] = static_cast<T>(std::sin(static_cast<double>(p) * w));
      data[p * d + 2 * k + 1] = static_cast<T>(std::cos(static_cast<double>(p) * w));
    }
  }
  return table;
}

// Affine map y = x W^T + b with weight [out x in], Xavier-initialized weight
// and zero bias.
template <typename T>
struct Linear {
  Tensor<T> weight;
  Tensor<T> bias;

  Linear() = default;
  Linear(Rng& rng, std::size_t in, std::size_t out)
      : weight(xavier_uniform<T>(rng, out, in)), bias(Tensor<T>({out}, true)) {}
  static Linear from_params(Tensor<T> w, Tensor<T> b) {
    Linear l;
    l.weight = std::move(w);
    l.bias = std::move(b);
    return l;
  }

  std::size_t in() const { return weight.extent(1); }
  std::size_t out() const { return weight.extent(0); }

  Tensor<T> forward(const Tensor<T>& x) const {
    if (x.ndim() != 2 || x.extent(1) != in()) {
      throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                           shape_str(weight.shape()));
    }
    return add_rowvec(matmul(x, transpose(weight)), bias);
  }
};

template <typename T>
struct LayerNorm {
  Tensor<T> gain;
  Tensor<T> offset;
  T epsilon = static_cast<T>(1e-5);

  LayerNorm() = default;
  explicit LayerNorm(std::size_t d)
      : gain({d}, std::vector<T>(d, T(1)), true), offset({d}, true) {}

  Tensor<T> forward(const Tensor<T>& x) const { return layer_norm(x, gain, offset, epsilon); }
};

// Sinusoidal at construction, free parameters afterwards.
template <typename T>
struct PositionalEncoding {
  Tensor<T> table;

  PositionalEncoding() = default;
  PositionalEncoding(std::size_t n, std::size_t d) : table(sinusoidal_init<T>(n, d, true)) {}
};

template <typename T>
struct AttentionOutput {
  Tensor<T> features;  // [n_q x d]
  Tensor<T> weights;   // [H x n_q x n_c], post-softmax rows
};

// Multi-head cross attention: LayerNorm on queries/keys/values, fused per-head
// projections, 1/sqrt(d_k) scaling, feature-axis head concatenation, output
// projection. The softmax weight stack is part of the result because the
// detail-mining stage consumes it.
template <typename T>
struct MultiHeadCrossAttention {
  std::size_t heads = 1;
  Linear<T> wq, wk, wv, wo;
  LayerNorm<T> ln_q, ln_k, ln_v;

  MultiHeadCrossAttention() = default;
  MultiHeadCrossAttention(Rng& rng, std::size_t h, std::size_t d)
      : heads(h),
        wq(rng, d, d),
        wk(rng, d, d),
        wv(rng, d, d),
        wo(rng, d, d),
        ln_q(d),
        ln_k(d),
        ln_v(d) {
    if (h == 0 || d % h != 0) {
      throw ConfigError("attention: d = " + std::to_string(d) + " not divisible by H = " +
                        std::to_string(h));
    }
  }

  std::size_t width() const { return wq.out(); }

  AttentionOutput<T> forward(const Tensor<T>& queries, const Tensor<T>& context) const {
    const std::size_t d = width();
    if (queries.ndim() != 2 || queries.extent(1) != d) {
      throw DimensionError("attention: queries " + shape_str(queries.shape()) +
                           " must have width " + std::to_string(d));
    }
    if (context.ndim() != 2 || context.extent(1) != d) {
      throw DimensionError("attention: context " + shape_str(context.shape()) +
                           " must have width " + std::to_string(d));
    }
    const std::size_t n_q = queries.extent(0);
    const std::size_t n_c = context.extent(0);
    const std::size_t d_k = d / heads;

    Tensor<T> q = wq.forward(ln_q.forward(queries));
    Tensor<T> k = wk.forward(ln_k.forward(context));
    Tensor<T> v = wv.forward(ln_v.forward(context));

    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_k)));
    std::vector<Tensor<T>> head_outputs;
    std::vector<Tensor<T>> weight_stack;
    head_outputs.reserve(heads);
    weight_stack.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      Tensor<T> qh = slice_cols(q, h * d_k, d_k);
      Tensor<T> kh = slice_cols(k, h * d_k, d_k);
      Tensor<T> vh = slice_cols(v, h * d_k, d_k);
      Tensor<T> scores = affine(matmul(qh, transpose(kh)), scale, T(0));
      Tensor<T> a = softmax(scores, 1);
      head_outputs.push_back(matmul(a, vh));
      weight_stack.push_back(reshape(a, {std::size_t(1), n_q, n_c}));
    }
    return {wo.forward(concat(1, head_outputs)), concat(0, weight_stack)};
  }

  // Registry hook; `sink(name, tensor)` is called once per parameter.
  template <typename Sink>
  void visit_params(const std::string& prefix, Sink&& sink) {
    sink(prefix + ".ln_q.gain", ln_q.gain);
    sink(prefix + ".ln_q.offset", ln_q.offset);
    sink(prefix + ".ln_k.gain", ln_k.gain);
    sink(prefix + ".ln_k.offset", ln_k.offset);
    sink(prefix + ".ln_v.gain", ln_v.gain);
    sink(prefix + ".ln_v.offset", ln_v.offset);
    sink(prefix + ".wq.weight", wq.weight);
    sink(prefix + ".wq.bias", wq.bias);
    sink(prefix + ".wk.weight", wk.weight);
    sink(prefix + ".wk.bias", wk.bias);
    sink(prefix + ".wv.weight", wv.weight);
    sink(prefix + ".wv.bias", wv.bias);
    sink(prefix + ".wo.weight", wo.weight);
    sink(prefix + ".wo.bias", wo.bias);
  }
};

}  // namespace hcc
