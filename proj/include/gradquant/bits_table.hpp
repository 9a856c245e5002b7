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

// Per-worker raw-bit table for a fully connected model.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradquant/codec.hpp"
#include "gradquant/common.hpp"

namespace gradquant {

// Weights plus biases of a dense network with the given layer widths.
inline std::size_t dense_parameter_count(const std::vector<std::size_t>& layers) {
  GQ_REQUIRE(layers.size() >= 2, "need at least an input and an output layer");
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    GQ_REQUIRE(layers[l] > 0 && layers[l + 1] > 0, "layer widths must be > 0");
    n += layers[l] * layers[l + 1] + layers[l + 1];
  }
  return n;
}

struct BitsRow {
  std::string scheme;
  std::uint64_t levels = 0;     // alphabet size per element
  std::size_t scales = 0;       // 32-bit scale factors sent
  double raw_bits = 0.0;
  bool reported_only = false;   // not asserted against a reference value
};

inline std::vector<BitsRow> bits_table(const std::vector<std::size_t>& layers) {
  const std::size_t n = dense_parameter_count(layers);
  const std::size_t tensors = 2 * (layers.size() - 1);
  auto row = [n](std::string name, std::uint64_t levels, std::size_t scales,
                 bool reported_only = false) {
    return BitsRow{std::move(name), levels, scales,
                   raw_bits(n, levels, scales), reported_only};
  };
  return {
      row("baseline_fp32", std::uint64_t{1} << 32, 0),
      row("onebit", 2, 2, true),
      row("terngrad", 3, tensors),
      row("qsgd_3", 3, 1),
      row("qsgd_5", 5, 1),
      row("dqsg_3", 3, 1),
      row("dqsg_5", 5, 1),
      row("ndqsg_k3", 3, 1),
  };
}

}  // namespace gradquant
