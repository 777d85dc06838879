// Copyright (c) 2026 the hcc authors
// SPDX-License-Identifier: Apache-2.0
//
// HCCT tensor container, shared by checkpoints, traces and datasets.
//
//   magic   "HCCT"            4 bytes
//   version u8                currently 1
//   dtype   u8                1 = float32, 2 = float64
//   ndim    u8
//   dims    u64 x ndim        little endian
//   payload row-major scalars little endian
//
// Round trips are bit exact: payloads are raw IEEE-754 bit patterns.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hcc/tensor.hpp"

namespace hcc::hcct {

inline constexpr char kMagic[4] = {'H', 'C', 'C', 'T'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::uint8_t kDtypeF64 = 2;
inline constexpr std::uint8_t kMaxNdim = 8;

namespace detail {

inline void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

template <typename T>
constexpr std::uint8_t dtype_code() {
  return std::is_same_v<T, float> ? kDtypeF32 : kDtypeF64;
}

template <typename T>
void put_scalar_le(std::string& out, T v) {
  if constexpr (std::is_same_v<T, float>) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  } else {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64le(out, bits);
  }
}

template <typename T>
T get_scalar_le(const unsigned char* p) {
  if constexpr (std::is_same_v<T, float>) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  } else {
    std::uint64_t bits = get_u64le(p);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
}

}  // namespace detail

template <typename T>
std::string encode(const Tensor<T>& t) {
  std::string out;
  out.reserve(7 + 8 * t.ndim() + sizeof(T) * t.size());
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(detail::dtype_code<T>()));
  out.push_back(static_cast<char>(t.ndim()));
  for (std::size_t d : t.shape()) detail::put_u64le(out, d);
  for (T v : t.data()) detail::put_scalar_le(out, v);
  return out;
}

template <typename T>
Tensor<T> decode(const std::string& bytes, const std::string& context = "") {
  const auto fail = [&](const std::string& why) -> void {
    throw FormatError("hcct" + (context.empty() ? "" : " [" + context + "]") + ": " + why);
  };
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 7) fail("truncated header");
  if (std::memcmp(p, kMagic, 4) != 0) fail("bad magic bytes");
  if (p[4] != kVersion) fail("unsupported version " + std::to_string(int(p[4])));
  if (p[5] != detail::dtype_code<T>()) {
    fail("dtype code " + std::to_string(int(p[5])) + " does not match requested element type");
  }
  const std::size_t ndim = p[6];
  if (ndim == 0 || ndim > kMaxNdim) fail("invalid ndim " + std::to_string(ndim));
  if (bytes.size() < 7 + 8 * ndim) fail("truncated dims");
  Shape shape(ndim);
  std::size_t count = 1;
  for (std::size_t d = 0; d < ndim; ++d) {
    const std::uint64_t e = detail::get_u64le(p + 7 + 8 * d);
    if (e == 0) fail("zero extent");
    shape[d] = static_cast<std::size_t>(e);
    count *= shape[d];
  }
  const std::size_t payload_at = 7 + 8 * ndim;
  if (bytes.size() != payload_at + sizeof(T) * count) {
    fail("payload size " + std::to_string(bytes.size() - payload_at) + " does not match shape " +
         shape_str(shape));
  }
  std::vector<T> data(count);
  for (std::size_t i = 0; i < count; ++i)
    data[i] = detail::get_scalar_le<T>(p + payload_at + sizeof(T) * i);
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
void save(const Tensor<T>& t, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("hcct: cannot open " + path.string() + " for writing");
  const std::string bytes = encode(t);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("hcct: short write to " + path.string());
}

template <typename T>
Tensor<T> load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("hcct: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode<T>(bytes, path.filename().string());
}

}  // namespace hcc::hcct
