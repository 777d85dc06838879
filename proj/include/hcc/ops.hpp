// Copyright (c) 2026 the hcc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "hcc/tensor.hpp"

namespace hcc {

enum class GeluKind { tanh_approx, exact_erf };

namespace detail {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void check_axis(const Tensor<T>& x, std::size_t axis, const char* op) {
  if (axis >= x.ndim()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(x.shape()));
  }
}

// C[p x r] = A[p x q] * B[q x r], row-major, widened accumulation.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t p, std::size_t q, std::size_t r) {
  std::vector<accum_t<T>> acc(r);
  for (std::size_t i = 0; i < p; ++i) {
    std::fill(acc.begin(), acc.end(), accum_t<T>(0));
    const T* arow = a + i * q;
    for (std::size_t k = 0; k < q; ++k) {
      const accum_t<T> aik = static_cast<accum_t<T>>(arow[k]);
      const T* brow = b + k * r;
      for (std::size_t j = 0; j < r; ++j) acc[j] += aik * static_cast<accum_t<T>>(brow[j]);
    }
    T* crow = c + i * r;
    for (std::size_t j = 0; j < r; ++j) crow[j] = static_cast<T>(acc[j]);
  }
}

// Z[p x q] = X[p x r] * Y[q x r]^T  (row dot products).
template <typename T>
void gemm_nt(const T* x, const T* y, T* z, std::size_t p, std::size_t r, std::size_t q) {
  for (std::size_t i = 0; i < p; ++i) {
    const T* xrow = x + i * r;
    for (std::size_t j = 0; j < q; ++j) {
      const T* yrow = y + j * r;
      accum_t<T> acc = 0;
      for (std::size_t m = 0; m < r; ++m)
        acc += static_cast<accum_t<T>>(xrow[m]) * static_cast<accum_t<T>>(yrow[m]);
      z[i * q + j] = static_cast<T>(acc);
    }
  }
}

// Z[q x r] = X[p x q]^T * Y[p x r].
template <typename T>
void gemm_tn(const T* x, const T* y, T* z, std::size_t p, std::size_t q, std::size_t r) {
  std::vector<accum_t<T>> acc(q * r, accum_t<T>(0));
  for (std::size_t i = 0; i < p; ++i) {
    const T* xrow = x + i * q;
    const T* yrow = y + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const accum_t<T> xik = static_cast<accum_t<T>>(xrow[k]);
      accum_t<T>* arow = acc.data() + k * r;
      for (std::size_t j = 0; j < r; ++j) arow[j] += xik * static_cast<accum_t<T>>(yrow[j]);
    }
  }
  for (std::size_t i = 0; i < q * r; ++i) z[i] = static_cast<T>(acc[i]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a, b}, [](auto& self) {
    if (self.parents[0]->requires_grad) {
      self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) self.parents[0]->grad[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) self.parents[1]->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a, b}, [](auto& self) {
    if (self.parents[0]->requires_grad) {
      self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) self.parents[0]->grad[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) self.parents[1]->grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a, b}, [](auto& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.data[i];
    }
  });
}

// y = scale * x + shift, elementwise. Covers all scalar arithmetic the
// modules need without general broadcasting.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * x.data()[i] + shift;
  return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [scale](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += scale * self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw DimensionError("matmul: expects 2-d operands, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  if (a.extent(1) != b.extent(0)) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  const std::size_t p = a.extent(0), q = a.extent(1), r = b.extent(1);
  std::vector<T> out(p * r);
  detail::gemm(a.data().data(), b.data().data(), out.data(), p, q, r);
  return Tensor<T>::make_op({p, r}, std::move(out), {a, b}, [p, q, r](auto& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      std::vector<T> da(p * q);
      detail::gemm_nt(self.grad.data(), pb.data.data(), da.data(), p, r, q);
      for (std::size_t i = 0; i < da.size(); ++i) pa.grad[i] += da[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      std::vector<T> db(q * r);
      detail::gemm_tn(pa.data.data(), self.grad.data(), db.data(), p, q, r);
      for (std::size_t i = 0; i < db.size(); ++i) pb.grad[i] += db[i];
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.ndim() != 2) throw DimensionError("transpose: expects a 2-d tensor, got " + shape_str(x.shape()));
  const std::size_t n = x.extent(0), m = x.extent(1);
  std::vector<T> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = x.data()[i * m + j];
  return Tensor<T>::make_op({m, n}, std::move(out), {x}, [n, m](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) p.grad[i * m + j] += self.grad[j * n + i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  check_shape_valid(shape);
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  return Tensor<T>::make_op(std::move(shape), std::vector<T>(x.data()), {x}, [](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> concat(std::size_t axis, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat: needs at least one part");
  const Shape& first = parts[0].shape();
  detail::check_axis(parts[0], axis, "concat");
  Shape out_shape = first;
  std::size_t total = first[axis];
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) {
        throw DimensionError("concat: shape mismatch " + shape_str(first) + " vs " + shape_str(s) +
                             " along axis " + std::to_string(axis));
      }
    }
    total += s[axis];
  }
  out_shape[axis] = total;

  // outer = product of extents before axis, inner = after.
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::vector<T> out(numel(out_shape));
  std::vector<std::size_t> extents;
  extents.reserve(parts.size());
  for (const auto& part : parts) extents.push_back(part.extent(axis));

  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::size_t block = extents[p] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(parts[p].data().data() + o * block, block,
                  out.data() + (o * total + offset) * inner);
    }
    offset += extents[p];
  }

  return Tensor<T>::make_op(std::move(out_shape), std::move(out), parts,
                            [outer, inner, total, extents](auto& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      auto& par = *self.parents[p];
      const std::size_t block = extents[p] * inner;
      if (par.requires_grad) {
        par.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = self.grad.data() + (o * total + offset) * inner;
          T* dst = par.grad.data() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      offset += extents[p];
    }
  });
}

// Columns [c0, c0+width) of a 2-d tensor.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t c0, std::size_t width) {
  if (x.ndim() != 2) throw DimensionError("slice_cols: expects a 2-d tensor");
  const std::size_t n = x.extent(0), d = x.extent(1);
  if (c0 + width > d || width == 0) {
    throw DimensionError("slice_cols: range [" + std::to_string(c0) + ", " +
                         std::to_string(c0 + width) + ") invalid for width " + std::to_string(d));
  }
  std::vector<T> out(n * width);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(x.data().data() + i * d + c0, width, out.data() + i * width);
  return Tensor<T>::make_op({n, width}, std::move(out), {x}, [n, d, c0, width](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < width; ++j) p.grad[i * d + c0 + j] += self.grad[i * width + j];
  });
}

// Rows of a 2-d tensor selected by index; gradient scatter-adds back.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& rows) {
  if (x.ndim() != 2) throw DimensionError("gather_rows: expects a 2-d tensor");
  const std::size_t n = x.extent(0), d = x.extent(1);
  if (rows.empty()) throw DimensionError("gather_rows: empty index list");
  for (std::size_t r : rows) {
    if (r >= n) throw DimensionError("gather_rows: row " + std::to_string(r) + " out of range");
  }
  std::vector<T> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(x.data().data() + rows[i] * d, d, out.data() + i * d);
  return Tensor<T>::make_op({rows.size(), d}, std::move(out), {x}, [rows, d](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) p.grad[rows[i] * d + j] += self.grad[i * d + j];
  });
}

// Elements of a 1-d tensor selected by index.
template <typename T>
Tensor<T> gather_elems(const Tensor<T>& x, const std::vector<std::size_t>& idx) {
  if (x.ndim() != 1) throw DimensionError("gather_elems: expects a 1-d tensor");
  for (std::size_t i : idx) {
    if (i >= x.size()) throw DimensionError("gather_elems: index " + std::to_string(i) + " out of range");
  }
  std::vector<T> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = x.data()[idx[i]];
  return Tensor<T>::make_op({idx.size()}, std::move(out), {x}, [idx](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) p.grad[idx[i]] += self.grad[i];
  });
}

// y[i, :] = x[i, :] * s[i]
template <typename T>
Tensor<T> row_scale(const Tensor<T>& x, const Tensor<T>& s) {
  if (x.ndim() != 2 || s.ndim() != 1 || s.size() != x.extent(0)) {
    throw DimensionError("row_scale: got " + shape_str(x.shape()) + " rows scaled by " +
                         shape_str(s.shape()));
  }
  const std::size_t n = x.extent(0), d = x.extent(1);
  std::vector<T> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.data()[i * d + j] * s.data()[i];
  return Tensor<T>::make_op({n, d}, std::move(out), {x, s}, [n, d](auto& self) {
    auto& px = *self.parents[0];
    auto& ps = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) px.grad[i * d + j] += self.grad[i * d + j] * ps.data[i];
    }
    if (ps.requires_grad) {
      ps.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        accum_t<T> acc = 0;
        for (std::size_t j = 0; j < d; ++j)
          acc += static_cast<accum_t<T>>(self.grad[i * d + j]) * static_cast<accum_t<T>>(px.data[i * d + j]);
        ps.grad[i] += static_cast<T>(acc);
      }
    }
  });
}

// y[i, :] = x[i, :] + b  (bias row applied to every row)
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.ndim() != 2 || b.ndim() != 1 || b.size() != x.extent(1)) {
    throw DimensionError("add_rowvec: got " + shape_str(x.shape()) + " plus " + shape_str(b.shape()));
  }
  const std::size_t n = x.extent(0), d = x.extent(1);
  std::vector<T> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.data()[i * d + j] + b.data()[j];
  return Tensor<T>::make_op({n, d}, std::move(out), {x, b}, [n, d](auto& self) {
    auto& px = *self.parents[0];
    auto& pb = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < n * d; ++i) px.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t j = 0; j < d; ++j) {
        accum_t<T> acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += static_cast<accum_t<T>>(self.grad[i * d + j]);
        pb.grad[j] += static_cast<T>(acc);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, std::size_t axis) {
  detail::check_axis(x, axis, "reduce_sum");
  const Shape& s = x.shape();
  Shape out_shape;
  for (std::size_t d = 0; d < s.size(); ++d)
    if (d != axis) out_shape.push_back(s[d]);
  if (out_shape.empty()) out_shape = {1};

  std::size_t outer = 1, inner = 1;
  const std::size_t n = s[axis];
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];

  std::vector<T> out(outer * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      accum_t<T> acc = 0;
      for (std::size_t a = 0; a < n; ++a)
        acc += static_cast<accum_t<T>>(x.data()[(o * n + a) * inner + i]);
      out[o * inner + i] = static_cast<T>(acc);
    }
  }
  return Tensor<T>::make_op(std::move(out_shape), std::move(out), {x}, [outer, inner, n](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t i = 0; i < inner; ++i)
          p.grad[(o * n + a) * inner + i] += self.grad[o * inner + i];
  });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  accum_t<T> acc = 0;
  for (T v : x.data()) acc += static_cast<accum_t<T>>(v);
  return Tensor<T>::make_op({1}, {static_cast<T>(acc)}, {x}, [](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  return affine(sum_all(x), static_cast<T>(1.0 / static_cast<double>(x.size())), T(0));
}

// Mean over the token axis of [n x d], kept as a [1 x d] row.
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  if (x.ndim() != 2) throw DimensionError("mean_rows: expects a 2-d tensor");
  const std::size_t n = x.extent(0), d = x.extent(1);
  return affine(reshape(reduce_sum(x, 0), {std::size_t(1), d}),
                static_cast<T>(1.0 / static_cast<double>(n)), T(0));
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  detail::check_axis(x, axis, "softmax");
  const Shape& s = x.shape();
  const std::size_t n = s[axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];

  std::vector<T> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      T mx = x.data()[(o * n) * inner + i];
      for (std::size_t a = 1; a < n; ++a) mx = std::max(mx, x.data()[(o * n + a) * inner + i]);
      accum_t<T> denom = 0;
      for (std::size_t a = 0; a < n; ++a) {
        const std::size_t idx = (o * n + a) * inner + i;
        out[idx] = std::exp(x.data()[idx] - mx);
        denom += static_cast<accum_t<T>>(out[idx]);
      }
      for (std::size_t a = 0; a < n; ++a) {
        const std::size_t idx = (o * n + a) * inner + i;
        out[idx] = static_cast<T>(static_cast<accum_t<T>>(out[idx]) / denom);
      }
    }
  }
  return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [outer, inner, n](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    // dx = y * (dy - sum(dy * y)) per slice
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        accum_t<T> dot = 0;
        for (std::size_t a = 0; a < n; ++a) {
          const std::size_t idx = (o * n + a) * inner + i;
          dot += static_cast<accum_t<T>>(self.grad[idx]) * static_cast<accum_t<T>>(self.data[idx]);
        }
        for (std::size_t a = 0; a < n; ++a) {
          const std::size_t idx = (o * n + a) * inner + i;
          p.grad[idx] += self.data[idx] * (self.grad[idx] - static_cast<T>(dot));
        }
      }
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = x.data()[i];
    // Branch on sign so neither exp overflows.
    out[i] = v >= 0 ? T(1) / (T(1) + std::exp(-v))
                    : static_cast<T>(std::exp(v) / (T(1) + std::exp(v)));
  }
  return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T y = self.data[i];
      p.grad[i] += self.grad[i] * y * (T(1) - y);
    }
  });
}

namespace detail {

template <typename T>
inline T gelu_value(T x, GeluKind kind) {
  if (kind == GeluKind::exact_erf) {
    return static_cast<T>(0.5) * x * (T(1) + static_cast<T>(std::erf(x * 0.70710678118654752440)));
  }
  // 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 x^3)))
  const T c = static_cast<T>(0.79788456080286535588);
  const T inner = c * (x + static_cast<T>(0.044715) * x * x * x);
  return static_cast<T>(0.5) * x * (T(1) + std::tanh(inner));
}

template <typename T>
inline T gelu_derivative(T x, GeluKind kind) {
  if (kind == GeluKind::exact_erf) {
    const T phi = static_cast<T>(std::exp(-0.5 * double(x) * double(x)) * 0.39894228040143267794);
    return static_cast<T>(0.5) * (T(1) + static_cast<T>(std::erf(x * 0.70710678118654752440))) + x * phi;
  }
  const T c = static_cast<T>(0.79788456080286535588);
  const T inner = c * (x + static_cast<T>(0.044715) * x * x * x);
  const T t = std::tanh(inner);
  const T dinner = c * (T(1) + static_cast<T>(3 * 0.044715) * x * x);
  return static_cast<T>(0.5) * (T(1) + t) + static_cast<T>(0.5) * x * (T(1) - t * t) * dinner;
}

}  // namespace detail

template <typename T>
Tensor<T> gelu(const Tensor<T>& x, GeluKind kind = GeluKind::tanh_approx) {
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::gelu_value(x.data()[i], kind);
  return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [kind](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += self.grad[i] * detail::gelu_derivative(p.data[i], kind);
  });
}

// Per-row layer normalization of [n x d] with trainable gain/offset of [d].
// Statistics use the biased variance, matching the usual transformer layout.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& offset,
                     T eps = static_cast<T>(1e-5)) {
  if (x.ndim() != 2) throw DimensionError("layer_norm: expects a 2-d tensor");
  const std::size_t n = x.extent(0), d = x.extent(1);
  if (gain.ndim() != 1 || gain.size() != d || offset.ndim() != 1 || offset.size() != d) {
    throw DimensionError("layer_norm: gain/offset must be length-" + std::to_string(d) + " vectors");
  }
  std::vector<T> out(n * d);
  auto xhat = std::make_shared<std::vector<T>>(n * d);
  auto inv_std = std::make_shared<std::vector<T>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x.data().data() + i * d;
    accum_t<T> mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += static_cast<accum_t<T>>(row[j]);
    mean /= static_cast<accum_t<T>>(d);
    accum_t<T> var = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const accum_t<T> c = static_cast<accum_t<T>>(row[j]) - mean;
      var += c * c;
    }
    var /= static_cast<accum_t<T>>(d);
    const T istd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + static_cast<double>(eps)));
    (*inv_std)[i] = istd;
    for (std::size_t j = 0; j < d; ++j) {
      const T xh = static_cast<T>((static_cast<accum_t<T>>(row[j]) - mean)) * istd;
      (*xhat)[i * d + j] = xh;
      out[i * d + j] = gain.data()[j] * xh + offset.data()[j];
    }
  }
  return Tensor<T>::make_op({n, d}, std::move(out), {x, gain, offset},
                            [n, d, xhat, inv_std](auto& self) {
    auto& px = *self.parents[0];
    auto& pg = *self.parents[1];
    auto& po = *self.parents[2];
    if (pg.requires_grad) {
      pg.ensure_grad();
      for (std::size_t j = 0; j < d; ++j) {
        accum_t<T> acc = 0;
        for (std::size_t i = 0; i < n; ++i)
          acc += static_cast<accum_t<T>>(self.grad[i * d + j]) * static_cast<accum_t<T>>((*xhat)[i * d + j]);
        pg.grad[j] += static_cast<T>(acc);
      }
    }
    if (po.requires_grad) {
      po.ensure_grad();
      for (std::size_t j = 0; j < d; ++j) {
        accum_t<T> acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += static_cast<accum_t<T>>(self.grad[i * d + j]);
        po.grad[j] += static_cast<T>(acc);
      }
    }
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        accum_t<T> mean_dxhat = 0, mean_dxhat_xhat = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const accum_t<T> dxh = static_cast<accum_t<T>>(self.grad[i * d + j]) *
                                 static_cast<accum_t<T>>(pg.data[j]);
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * static_cast<accum_t<T>>((*xhat)[i * d + j]);
        }
        mean_dxhat /= static_cast<accum_t<T>>(d);
        mean_dxhat_xhat /= static_cast<accum_t<T>>(d);
        for (std::size_t j = 0; j < d; ++j) {
          const accum_t<T> dxh = static_cast<accum_t<T>>(self.grad[i * d + j]) *
                                 static_cast<accum_t<T>>(pg.data[j]);
          px.grad[i * d + j] += static_cast<T>(
              static_cast<accum_t<T>>((*inv_std)[i]) *
              (dxh - mean_dxhat - static_cast<accum_t<T>>((*xhat)[i * d + j]) * mean_dxhat_xhat));
        }
      }
    }
  });
}

// Negative log likelihood of `label` under softmax(logits). Accepts a [C] or
// [1 x C] logit tensor; returns a scalar.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t label) {
  const std::size_t c = logits.size();
  if (logits.ndim() > 2 || (logits.ndim() == 2 && logits.extent(0) != 1)) {
    throw DimensionError("cross_entropy: expects [C] or [1 x C] logits, got " + shape_str(logits.shape()));
  }
  if (label >= c) throw InputError("cross_entropy: label " + std::to_string(label) + " out of range");
  T mx = logits.data()[0];
  for (T v : logits.data()) mx = std::max(mx, v);
  accum_t<T> denom = 0;
  for (T v : logits.data()) denom += std::exp(static_cast<accum_t<T>>(v - mx));
  const T loss = static_cast<T>(std::log(denom) - static_cast<accum_t<T>>(logits.data()[label] - mx));
  return Tensor<T>::make_op({1}, {loss}, {logits}, [label, mx, denom, c](auto& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t j = 0; j < c; ++j) {
      const T soft = static_cast<T>(std::exp(static_cast<accum_t<T>>(p.data[j] - mx)) / denom);
      p.grad[j] += self.grad[0] * (soft - (j == label ? T(1) : T(0)));
    }
  });
}

// ---------------------------------------------------------------------------
// Top-K selection (forward only; selection has no gradient)
// ---------------------------------------------------------------------------

template <typename T>
struct TopK {
  std::vector<std::size_t> indices;  // ascending index order
  Tensor<T> values;                  // scores at those indices, same order
};

// Indices of the k largest scores. Ties break toward the lower index; the
// result is reported in ascending index order.
template <typename T>
TopK<T> topk(const Tensor<T>& scores, std::size_t k) {
  if (scores.ndim() != 1) throw DimensionError("topk: expects a 1-d score vector");
  const std::size_t m = scores.size();
  if (k < 1 || k > m) {
    throw ConfigError("topk: k = " + std::to_string(k) + " outside [1, " + std::to_string(m) + "]");
  }
  for (T v : scores.data()) {
    if (std::isnan(static_cast<double>(v))) throw InputError("topk: NaN score");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores.data()[a] != scores.data()[b]) return scores.data()[a] > scores.data()[b];
                      return a < b;
                    });
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<T> vals(k);
  for (std::size_t i = 0; i < k; ++i) vals[i] = scores.data()[order[i]];
  return TopK<T>{std::move(order), Tensor<T>({k}, std::move(vals))};
}

}  // namespace hcc
