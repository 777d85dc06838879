// Copyright (c) 2026 the hcc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "hcc/tensor.hpp"

namespace hcc {

// Deterministic PCG32 (PCG-XSH-RR 64/32, O'Neill 2014) generator. The
// standard library distributions are implementation-defined, so every draw
// below is specified explicitly:
//
//   state' = state * 6364136223846793005 + 12345
//   output = rotr32((((state >> 18) ^ state) >> 27) as u32, state >> 59)
//
//   u64    = two outputs glued together, high word first
//   f64    = top 53 bits of u64, scaled by 2^-53          -> [0, 1)
//   normal = Box-Muller on two uniforms, cosine branch only
//
// Identical seeds give identical sequences on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(0) {
    // Standard PCG seeding: advance once around the seed.
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + 12345ULL;
    std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59U);
    return (xorshifted >> rot) | (xorshifted << ((32U - rot) & 31U));
  }

  std::uint64_t next_u64() {
    std::uint64_t hi = next_u32();
    std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes two uniforms per draw and keeps
  // only the cosine branch so the stream position stays easy to reason about.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // Guard the log against u1 == 0.
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::size_t index(std::size_t n) {
    // Rejection-free modulo bias is irrelevant at the sizes used here, but a
    // 64-bit draw keeps it below 2^-11 for n < 2^53.
    return static_cast<std::size_t>(next_u64() % n);
  }

  // Independent child stream; salt values must be distinct per use site.
  Rng child(std::uint64_t salt) const {
    return Rng(splitmix64(state_ ^ (0x9E3779B97F4A7C15ULL * (salt + 1))));
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t state_;
};

template <typename T>
Tensor<T> uniform_tensor(Rng& rng, Shape shape, double lo, double hi,
                         bool requires_grad = false) {
  Tensor<T> out(std::move(shape), requires_grad);
  for (T& v : out.mutable_data()) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

template <typename T>
Tensor<T> normal_tensor(Rng& rng, Shape shape, double mean, double stddev,
                        bool requires_grad = false) {
  Tensor<T> out(std::move(shape), requires_grad);
  for (T& v : out.mutable_data()) v = static_cast<T>(rng.normal(mean, stddev));
  return out;
}

}  // namespace hcc
