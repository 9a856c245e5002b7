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

// Counter-based dither generation.
//
// A dither sample is addressed by (seed, round, index) and computed with a
// pure function, so a worker and the server that mirrors it produce the
// same pseudo-random sequence without sharing any generator state. Seed
// updates between iterations are realised by incrementing the round
// counter; the seed itself never changes.

#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "gradquant/common.hpp"

namespace gradquant {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kIndexStride = 0xBF58476D1CE4E5B9ULL;

// SplitMix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Top 53 bits mapped to [0, 1).
constexpr double to_unit(std::uint64_t z) noexcept {
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

struct DitherCoordinates {
  std::uint64_t seed = 0;
  std::uint64_t round = 0;

  friend bool operator==(const DitherCoordinates&,
                         const DitherCoordinates&) = default;
};

// Multipliers used to address a sample. Exposed so that tests and the
// verification driver can run a negative control with a broken stream.
struct DitherConstants {
  std::uint64_t round_mul = kGoldenGamma;
  std::uint64_t index_mul = kIndexStride;
};

// Raw unit-uniform sample for (seed, round, index).
constexpr double unit_at(const DitherCoordinates& c, std::uint64_t index,
                         const DitherConstants& k = {}) noexcept {
  std::uint64_t stream = mix64(c.seed + k.round_mul * c.round);
  return to_unit(mix64(stream + k.index_mul * index));
}

// Uniform dither on [-delta/2, delta/2).
inline double dither_at(const DitherCoordinates& c, std::uint64_t index,
                        double delta, const DitherConstants& k = {}) {
  GQ_REQUIRE(delta > 0.0 && std::isfinite(delta),
             "dither step must be positive, got ", delta);
  return (unit_at(c, index, k) - 0.5) * delta;
}

// Fills out[i] = dither_at(c, offset + i, delta).
inline void fill_dither(const DitherCoordinates& c, double delta,
                        std::span<double> out, std::uint64_t offset = 0,
                        const DitherConstants& k = {}) {
  GQ_REQUIRE(delta > 0.0 && std::isfinite(delta),
             "dither step must be positive, got ", delta);
  std::uint64_t stream = mix64(c.seed + k.round_mul * c.round);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (to_unit(mix64(stream + k.index_mul * (offset + i))) - 0.5) * delta;
  }
}

inline DitherCoordinates advance_round(const DitherCoordinates& c) {
  if (c.round == std::numeric_limits<std::uint64_t>::max()) {
    throw ProtocolError("dither round counter overflow");
  }
  return {c.seed, c.round + 1};
}

// Worker p gets seed master_seed + p.
constexpr std::uint64_t worker_seed(std::uint64_t master_seed,
                                    std::uint64_t worker_id) noexcept {
  return master_seed + worker_id;
}

}  // namespace gradquant
