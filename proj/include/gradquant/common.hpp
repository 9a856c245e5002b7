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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#ifndef GRADQUANT_VERSION
#define GRADQUANT_VERSION "0.1.0"
#endif

namespace gradquant {

inline constexpr const char* kVersion = GRADQUANT_VERSION;

// Error taxonomy. Everything derives from std::runtime_error or
// std::invalid_argument so callers can catch coarse-grained.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct TrainingAborted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

#define GQ_REQUIRE(cond, ...)                                              \
  do {                                                                     \
    if (!(cond)) {                                                         \
      throw ::gradquant::InvalidArgument(                                  \
          ::gradquant::detail::concat(__VA_ARGS__));                       \
    }                                                                      \
  } while (0)

// Flat gradient/parameter buffer with tensor-shape metadata.
struct GradientVector {
  std::vector<double> values;
  std::vector<std::size_t> shape;

  GradientVector() = default;
  explicit GradientVector(std::vector<double> v)
      : values(std::move(v)), shape{values.size()} {}
  GradientVector(std::vector<double> v, std::vector<std::size_t> s)
      : values(std::move(v)), shape(std::move(s)) {
    std::size_t prod = std::accumulate(shape.begin(), shape.end(),
                                       std::size_t{1}, std::multiplies<>());
    GQ_REQUIRE(prod == values.size(), "shape product ", prod,
               " does not match length ", values.size());
  }
  static GradientVector zeros(std::size_t n) {
    return GradientVector(std::vector<double>(n, 0.0));
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> view() const { return values; }
  std::span<double> view() { return values; }

  bool all_finite() const {
    return std::all_of(values.begin(), values.end(),
                       [](double x) { return std::isfinite(x); });
  }
};

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace gradquant
