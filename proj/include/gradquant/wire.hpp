// Copyright 2026 The gradquant Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Binary message layout shared by workers and server.
//
//   u8  quantizer kind
//   u32 n
//   u32 K               number of partitions
//   f32 kappa x K
//   u64 seed
//   u64 round
//   indices, (index - min) packed at a fixed width, LSB-first within bytes
//
// All multi-byte fields are little-endian. The width is ceil(log2(2M+1))
// for uniform quantizers and ceil(log2 k) for nested ones. The quantizer
// configuration is not on the wire; both ends agree on it out of band.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <type_traits>
#include <vector>

#include "gradquant/common.hpp"
#include "gradquant/nested.hpp"
#include "gradquant/quantizer.hpp"

namespace gradquant {

// Bits needed to represent `levels` distinct values.
constexpr unsigned bits_for_levels(std::uint64_t levels) {
  return levels <= 1 ? 0u
                     : static_cast<unsigned>(std::bit_width(levels - 1));
}

class BitWriter {
 public:
  void put(std::uint64_t value, unsigned width) {
    for (unsigned b = 0; b < width; ++b) put_bit((value >> b) & 1u);
  }
  void put_bit(unsigned bit) {
    if (nbits_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(1u << (nbits_ % 8));
    ++nbits_;
  }
  std::size_t bit_count() const { return nbits_; }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t nbits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t get(unsigned width) {
    std::uint64_t v = 0;
    for (unsigned b = 0; b < width; ++b) v |= std::uint64_t{get_bit()} << b;
    return v;
  }
  unsigned get_bit() {
    if (pos_ >= bytes_.size() * 8) {
      throw DecodeError("bit stream truncated");
    }
    unsigned bit = (bytes_[pos_ / 8] >> (pos_ % 8)) & 1u;
    ++pos_;
    return bit;
  }
  // Past-the-end reads return `fill` instead of throwing.
  unsigned get_bit_or(unsigned fill) {
    return pos_ < bytes_.size() * 8 ? get_bit() : (++pos_, fill);
  }
  std::size_t position() const { return pos_; }
  std::size_t available() const { return bytes_.size() * 8; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

namespace wire {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::make_unsigned_t<
      std::conditional_t<std::is_floating_point_v<T>,
                         std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                            std::uint64_t>,
                         T>>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& offset) {
  if (offset + sizeof(T) > in.size()) {
    throw DecodeError(detail::concat("header truncated at byte ", offset));
  }
  std::uint64_t bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    bits |= std::uint64_t{in[offset + b]} << (8 * b);
  }
  offset += sizeof(T);
  T value;
  if constexpr (sizeof(T) == 8) {
    std::memcpy(&value, &bits, 8);
  } else if constexpr (sizeof(T) == 4) {
    auto narrow = static_cast<std::uint32_t>(bits);
    std::memcpy(&value, &narrow, 4);
  } else {
    value = static_cast<T>(bits);
  }
  return value;
}

inline unsigned index_width(const QuantizedMessage& msg) {
  return bits_for_levels(static_cast<std::uint64_t>(msg.cfg.alphabet_size()));
}

}  // namespace wire

inline std::vector<std::uint8_t> serialize(const QuantizedMessage& msg) {
  GQ_REQUIRE(msg.kind == QuantizerKind::kDithered ||
                 msg.kind == QuantizerKind::kStochastic,
             "serialize: unsupported quantizer kind");
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(msg.kind));
  wire::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(msg.size()));
  wire::put_le<std::uint32_t>(out,
                              static_cast<std::uint32_t>(msg.partitions.size()));
  for (const auto& p : msg.partitions) {
    wire::put_le<float>(out, static_cast<float>(p.kappa));
  }
  wire::put_le<std::uint64_t>(out, msg.dither.seed);
  wire::put_le<std::uint64_t>(out, msg.dither.round);
  BitWriter bw;
  const unsigned width = wire::index_width(msg);
  const std::int64_t m = msg.cfg.levels_m;
  for (std::int32_t q : msg.indices) {
    GQ_REQUIRE(q >= -m && q <= m, "index ", q, " outside [-", m, ", ", m, "]");
    bw.put(static_cast<std::uint64_t>(q + m), width);
  }
  out.insert(out.end(), bw.bytes().begin(), bw.bytes().end());
  return out;
}

inline QuantizedMessage deserialize_quantized(std::span<const std::uint8_t> in,
                                              const UniformQuantizerCfg& cfg) {
  std::size_t off = 0;
  QuantizedMessage msg;
  auto kind = wire::get_le<std::uint8_t>(in, off);
  if (kind != static_cast<std::uint8_t>(QuantizerKind::kDithered) &&
      kind != static_cast<std::uint8_t>(QuantizerKind::kStochastic)) {
    throw DecodeError(detail::concat("unexpected quantizer kind ", int{kind}));
  }
  msg.kind = static_cast<QuantizerKind>(kind);
  msg.cfg = cfg;
  const auto n = wire::get_le<std::uint32_t>(in, off);
  const auto k = wire::get_le<std::uint32_t>(in, off);
  if (n == 0 || k == 0 || k > n) {
    throw DecodeError(detail::concat("bad header: n=", n, " K=", k));
  }
  auto ranges = partition_ranges(n, k);
  for (std::uint32_t j = 0; j < k; ++j) {
    double kappa = wire::get_le<float>(in, off);
    msg.partitions.push_back({ranges[j].first, ranges[j].second, kappa});
    msg.kappa = std::max(msg.kappa, kappa);
  }
  msg.dither.seed = wire::get_le<std::uint64_t>(in, off);
  msg.dither.round = wire::get_le<std::uint64_t>(in, off);
  BitReader br(in.subspan(off));
  const unsigned width = wire::index_width(msg);
  const std::int64_t m = cfg.levels_m;
  msg.indices.resize(n);
  for (auto& q : msg.indices) {
    auto raw = static_cast<std::int64_t>(br.get(width));
    if (raw > 2 * m) {
      throw DecodeError(detail::concat("packed index ", raw, " exceeds 2M=",
                                       2 * m));
    }
    q = static_cast<std::int32_t>(raw - m);
  }
  return msg;
}

inline std::vector<std::uint8_t> serialize(const NestedMessage& msg) {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(QuantizerKind::kNested));
  wire::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(msg.size()));
  wire::put_le<std::uint32_t>(out, 1);
  wire::put_le<float>(out, static_cast<float>(msg.kappa));
  wire::put_le<std::uint64_t>(out, msg.dither.seed);
  wire::put_le<std::uint64_t>(out, msg.dither.round);
  BitWriter bw;
  const unsigned width = bits_for_levels(msg.cfg.nesting_k);
  const std::int64_t lo = msg.cfg.min_index();
  for (std::int32_t s : msg.rel_indices) {
    GQ_REQUIRE(s >= lo && s <= msg.cfg.max_index(), "relative index ", s,
               " outside the residue set");
    bw.put(static_cast<std::uint64_t>(s - lo), width);
  }
  out.insert(out.end(), bw.bytes().begin(), bw.bytes().end());
  return out;
}

inline NestedMessage deserialize_nested(std::span<const std::uint8_t> in,
                                        const NestedConfig& cfg) {
  std::size_t off = 0;
  auto kind = wire::get_le<std::uint8_t>(in, off);
  if (kind != static_cast<std::uint8_t>(QuantizerKind::kNested)) {
    throw DecodeError(detail::concat("unexpected quantizer kind ", int{kind}));
  }
  NestedMessage msg;
  msg.cfg = cfg;
  const auto n = wire::get_le<std::uint32_t>(in, off);
  const auto k = wire::get_le<std::uint32_t>(in, off);
  if (n == 0 || k != 1) {
    throw DecodeError(detail::concat("bad nested header: n=", n, " K=", k));
  }
  msg.kappa = wire::get_le<float>(in, off);
  msg.dither.seed = wire::get_le<std::uint64_t>(in, off);
  msg.dither.round = wire::get_le<std::uint64_t>(in, off);
  BitReader br(in.subspan(off));
  const unsigned width = bits_for_levels(cfg.nesting_k);
  const std::int64_t lo = cfg.min_index();
  msg.rel_indices.resize(n);
  for (auto& s : msg.rel_indices) {
    auto raw = static_cast<std::int64_t>(br.get(width));
    if (raw >= cfg.nesting_k) {
      throw DecodeError(detail::concat("packed residue ", raw, " >= k"));
    }
    s = static_cast<std::int32_t>(raw + lo);
  }
  return msg;
}

}  // namespace gradquant
