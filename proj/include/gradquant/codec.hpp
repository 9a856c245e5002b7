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

// Bit accounting, empirical entropy and an adaptive arithmetic coder for
// quantization-index streams.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "gradquant/common.hpp"
#include "gradquant/wire.hpp"

namespace gradquant {

// Bits used for one transmitted scale factor.
inline constexpr unsigned kScaleBits = 32;

struct IndexStream {
  std::vector<std::int32_t> symbols;
  std::int32_t alphabet_min = 0;
  std::int32_t alphabet_max = 0;

  std::size_t alphabet_size() const {
    return static_cast<std::size_t>(alphabet_max - alphabet_min + 1);
  }
  void validate() const {
    GQ_REQUIRE(alphabet_max >= alphabet_min, "empty alphabet [",
               alphabet_min, ", ", alphabet_max, "]");
    for (auto s : symbols) {
      GQ_REQUIRE(s >= alphabet_min && s <= alphabet_max, "symbol ", s,
                 " outside alphabet [", alphabet_min, ", ", alphabet_max,
                 "]");
    }
  }
};

struct BitReport {
  double raw_bits = 0.0;         // ideal fixed-rate, n log2(levels) + scales
  std::uint64_t packed_bits = 0; // n ceil(log2 levels) + scales
  double entropy_bits = 0.0;     // n H(empirical) + scales
  std::uint64_t coded_bits = 0;  // arithmetic-coded payload + scales
  std::uint64_t scale_bits = 0;

  BitReport& operator+=(const BitReport& o) {
    raw_bits += o.raw_bits;
    packed_bits += o.packed_bits;
    entropy_bits += o.entropy_bits;
    coded_bits += o.coded_bits;
    scale_bits += o.scale_bits;
    return *this;
  }
};

// n log2(levels) + 32 K. Fractional bits: the ideal fixed-rate cost when
// indices are block-packed.
inline double raw_bits(std::size_t n, std::uint64_t levels,
                       std::size_t num_partitions) {
  GQ_REQUIRE(levels >= 2, "levels must be >= 2, got ", levels);
  GQ_REQUIRE(n >= 1, "n must be >= 1");
  return static_cast<double>(n) * std::log2(static_cast<double>(levels)) +
         static_cast<double>(kScaleBits * num_partitions);
}

// n ceil(log2 levels) + 32 K: bits after per-index fixed-width packing.
inline std::uint64_t packed_bits(std::size_t n, std::uint64_t levels,
                                 std::size_t num_partitions) {
  GQ_REQUIRE(levels >= 2, "levels must be >= 2, got ", levels);
  return static_cast<std::uint64_t>(n) * bits_for_levels(levels) +
         kScaleBits * num_partitions;
}

// n H where H is the zeroth-order entropy of the empirical frequencies.
inline double empirical_entropy(std::span<const std::int32_t> symbols) {
  GQ_REQUIRE(!symbols.empty(), "empirical_entropy of an empty stream");
  std::map<std::int32_t, std::size_t> counts;
  for (auto s : symbols) ++counts[s];
  const double n = static_cast<double>(symbols.size());
  double bits = 0.0;
  for (const auto& [sym, c] : counts) {
    const double cd = static_cast<double>(c);
    bits -= cd * std::log2(cd / n);
  }
  return bits;
}

inline double empirical_entropy(const IndexStream& stream) {
  return empirical_entropy(std::span<const std::int32_t>(stream.symbols));
}

// ---------------------------------------------------------------------------
// Adaptive arithmetic coding.

// Frequency counts start at 1 and grow by 1 per coded symbol; all counts are
// halved (rounding up) once the total exceeds 2^16.
class AdaptiveFrequencyModel {
 public:
  static constexpr std::uint32_t kMaxTotal = 1u << 16;
  static constexpr std::size_t kMaxAlphabet = 256;

  explicit AdaptiveFrequencyModel(std::size_t alphabet)
      : freq_(alphabet, 1), total_(static_cast<std::uint32_t>(alphabet)) {
    GQ_REQUIRE(alphabet >= 1 && alphabet <= kMaxAlphabet, "alphabet size ",
               alphabet, " outside [1, ", kMaxAlphabet, "]");
  }

  std::size_t size() const { return freq_.size(); }
  std::uint32_t total() const { return total_; }

  std::pair<std::uint32_t, std::uint32_t> range(std::size_t sym) const {
    std::uint32_t lo = 0;
    for (std::size_t i = 0; i < sym; ++i) lo += freq_[i];
    return {lo, lo + freq_[sym]};
  }

  // Symbol whose cumulative range contains `target`.
  std::size_t find(std::uint32_t target, std::uint32_t& lo,
                   std::uint32_t& hi) const {
    std::uint32_t acc = 0;
    for (std::size_t i = 0; i < freq_.size(); ++i) {
      if (target < acc + freq_[i]) {
        lo = acc;
        hi = acc + freq_[i];
        return i;
      }
      acc += freq_[i];
    }
    throw DecodeError("arithmetic decoder target out of range");
  }

  void update(std::size_t sym) {
    ++freq_[sym];
    ++total_;
    if (total_ > kMaxTotal) {
      total_ = 0;
      for (auto& f : freq_) {
        f = (f + 1) / 2;
        total_ += f;
      }
    }
  }

 private:
  std::vector<std::uint32_t> freq_;
  std::uint32_t total_;
};

// 32-bit binary arithmetic coder with underflow (pending-bit) handling.
// The encoder flushes the full final low value, so the decoder never needs
// bits beyond the payload; reading past it means the stream was truncated.
class ArithmeticEncoder {
 public:
  void encode(std::uint32_t cum_lo, std::uint32_t cum_hi, std::uint32_t total) {
    const std::uint64_t range = high_ - low_ + 1;
    high_ = low_ + range * cum_hi / total - 1;
    low_ = low_ + range * cum_lo / total;
    for (;;) {
      if (high_ < kHalf) {
        emit(0);
      } else if (low_ >= kHalf) {
        emit(1);
        low_ -= kHalf;
        high_ -= kHalf;
      } else if (low_ >= kQuarter && high_ < 3 * kQuarter) {
        ++pending_;
        low_ -= kQuarter;
        high_ -= kQuarter;
      } else {
        break;
      }
      low_ = 2 * low_;
      high_ = 2 * high_ + 1;
    }
  }

  std::vector<std::uint8_t> finish() {
    emit(static_cast<unsigned>((low_ >> 31) & 1u));
    for (int b = 30; b >= 0; --b) out_.put_bit((low_ >> b) & 1u);
    return std::move(out_.bytes());
  }

  std::size_t bits_written() const { return out_.bit_count(); }

 private:
  static constexpr std::uint64_t kHalf = 1ull << 31;
  static constexpr std::uint64_t kQuarter = 1ull << 30;

  void emit(unsigned bit) {
    out_.put_bit(bit);
    for (; pending_ > 0; --pending_) out_.put_bit(bit ^ 1u);
  }

  std::uint64_t low_ = 0;
  std::uint64_t high_ = 0xFFFFFFFFull;
  std::uint64_t pending_ = 0;
  BitWriter out_;
};

class ArithmeticDecoder {
 public:
  explicit ArithmeticDecoder(std::span<const std::uint8_t> payload)
      : in_(payload) {
    for (int b = 0; b < 32; ++b) value_ = (value_ << 1) | next_bit();
  }

  std::uint32_t target(std::uint32_t total) const {
    const std::uint64_t range = high_ - low_ + 1;
    return static_cast<std::uint32_t>(((value_ - low_ + 1) * total - 1) /
                                      range);
  }

  void consume(std::uint32_t cum_lo, std::uint32_t cum_hi,
               std::uint32_t total) {
    const std::uint64_t range = high_ - low_ + 1;
    high_ = low_ + range * cum_hi / total - 1;
    low_ = low_ + range * cum_lo / total;
    for (;;) {
      if (high_ < kHalf) {
        // nothing to subtract
      } else if (low_ >= kHalf) {
        value_ -= kHalf;
        low_ -= kHalf;
        high_ -= kHalf;
      } else if (low_ >= kQuarter && high_ < 3 * kQuarter) {
        value_ -= kQuarter;
        low_ -= kQuarter;
        high_ -= kQuarter;
      } else {
        break;
      }
      low_ = 2 * low_;
      high_ = 2 * high_ + 1;
      value_ = 2 * value_ + next_bit();
    }
  }

 private:
  static constexpr std::uint64_t kHalf = 1ull << 31;
  static constexpr std::uint64_t kQuarter = 1ull << 30;

  unsigned next_bit() {
    if (in_.position() >= in_.available()) {
      throw DecodeError("arithmetic-coded payload truncated");
    }
    return in_.get_bit();
  }

  BitReader in_;
  std::uint64_t low_ = 0;
  std::uint64_t high_ = 0xFFFFFFFFull;
  std::uint64_t value_ = 0;
};

// Adaptive arithmetic coding of a symbol stream (payload only, no header).
inline std::vector<std::uint8_t> aac_encode(const IndexStream& stream) {
  stream.validate();
  AdaptiveFrequencyModel model(stream.alphabet_size());
  ArithmeticEncoder enc;
  for (auto s : stream.symbols) {
    const auto sym = static_cast<std::size_t>(s - stream.alphabet_min);
    auto [lo, hi] = model.range(sym);
    enc.encode(lo, hi, model.total());
    model.update(sym);
  }
  return enc.finish();
}

inline IndexStream aac_decode(std::span<const std::uint8_t> payload,
                              std::size_t n, std::int32_t alphabet_min,
                              std::int32_t alphabet_max) {
  GQ_REQUIRE(alphabet_max >= alphabet_min, "empty alphabet");
  IndexStream out;
  out.alphabet_min = alphabet_min;
  out.alphabet_max = alphabet_max;
  AdaptiveFrequencyModel model(out.alphabet_size());
  ArithmeticDecoder dec(payload);
  out.symbols.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t lo = 0, hi = 0;
    const auto sym = model.find(dec.target(model.total()), lo, hi);
    dec.consume(lo, hi, model.total());
    model.update(sym);
    out.symbols.push_back(static_cast<std::int32_t>(sym) + alphabet_min);
  }
  return out;
}

// Coded frame: u32 symbol count, u8 alphabet size, payload (little-endian).
inline std::vector<std::uint8_t> aac_encode_frame(const IndexStream& stream) {
  GQ_REQUIRE(stream.alphabet_size() <= 255, "frame alphabet size ",
             stream.alphabet_size(), " does not fit in a byte");
  std::vector<std::uint8_t> out;
  wire::put_le<std::uint32_t>(out,
                              static_cast<std::uint32_t>(stream.symbols.size()));
  out.push_back(static_cast<std::uint8_t>(stream.alphabet_size()));
  auto payload = aac_encode(stream);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline IndexStream aac_decode_frame(std::span<const std::uint8_t> frame,
                                    std::int32_t alphabet_min) {
  std::size_t off = 0;
  const auto n = wire::get_le<std::uint32_t>(frame, off);
  const auto alphabet = wire::get_le<std::uint8_t>(frame, off);
  if (alphabet == 0) throw DecodeError("frame declares an empty alphabet");
  return aac_decode(frame.subspan(off), n, alphabet_min,
                    alphabet_min + static_cast<std::int32_t>(alphabet) - 1);
}

// Raw, entropy and coded bit counts for one index stream plus `num_scales`
// transmitted scale factors. `levels` is the fixed-rate alphabet size.
// Alphabets too large for the adaptive coder are charged at packed size.
inline BitReport measure_bits(const IndexStream& stream, std::uint64_t levels,
                              std::size_t num_scales) {
  BitReport r;
  const std::size_t n = stream.symbols.size();
  r.scale_bits = kScaleBits * num_scales;
  r.raw_bits = raw_bits(n, levels, num_scales);
  r.packed_bits = packed_bits(n, levels, num_scales);
  r.entropy_bits = empirical_entropy(stream) + static_cast<double>(r.scale_bits);
  r.coded_bits =
      stream.alphabet_size() <= AdaptiveFrequencyModel::kMaxAlphabet
          ? aac_encode(stream).size() * 8 + r.scale_bits
          : r.packed_bits;
  return r;
}

}  // namespace gradquant
