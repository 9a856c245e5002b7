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

// Scalar and vector gradient quantizers: uniform, subtractive-dithered,
// half-dithered, stochastic (QSGD / TernGrad), one-bit with error feedback,
// and partitioned dithered encoding.
//
// All vector quantizers normalise by the scale factor kappa = ||g||_inf so
// that every normalised entry lies in [-1, 1]. kappa travels on the wire as
// an IEEE binary32 value; encoders round it *up* to the nearest float so the
// normalised input never leaves [-1, 1] and both ends divide by the same
// number.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gradquant/common.hpp"
#include "gradquant/dither.hpp"

namespace gradquant {

enum class QuantizerKind : std::uint8_t {
  kNone = 0,
  kDithered = 1,
  kStochastic = 2,
  kNested = 3,
  kOneBit = 4,
};

// Nearest integer, ties away from zero.
inline double round_half_away(double x) { return std::round(x); }

inline double uniform_quantize(double v, double delta) {
  GQ_REQUIRE(std::isfinite(v), "uniform_quantize: non-finite input ", v);
  GQ_REQUIRE(delta > 0.0 && std::isfinite(delta),
             "uniform_quantize: step must be positive, got ", delta);
  return delta * round_half_away(v / delta);
}

struct UniformQuantizerCfg {
  double delta = 0.5;
  int levels_m = 2;

  // Normalised configuration: delta = 1/M, indices in {-M..M}.
  static UniformQuantizerCfg with_levels(int m) {
    GQ_REQUIRE(m >= 1, "levels_m must be >= 1, got ", m);
    return {1.0 / m, m};
  }
  void validate() const {
    GQ_REQUIRE(delta > 0.0 && std::isfinite(delta),
               "quantizer step must be positive, got ", delta);
    GQ_REQUIRE(levels_m >= 1, "levels_m must be >= 1, got ", levels_m);
  }
  int alphabet_size() const { return 2 * levels_m + 1; }

  friend bool operator==(const UniformQuantizerCfg&,
                         const UniformQuantizerCfg&) = default;
};

// Smallest binary32 value >= x (x >= 0, finite).
inline double wire_scale(double x) {
  GQ_REQUIRE(std::isfinite(x) && x >= 0.0, "scale factor must be finite ",
             "and nonnegative, got ", x);
  GQ_REQUIRE(x <= std::numeric_limits<float>::max(),
             "scale factor ", x, " exceeds binary32 range");
  float f = static_cast<float>(x);
  if (static_cast<double>(f) < x) {
    f = std::nextafter(f, std::numeric_limits<float>::infinity());
  }
  return static_cast<double>(f);
}

struct PartitionBound {
  std::size_t start = 0;
  std::size_t end = 0;
  double kappa = 0.0;

  friend bool operator==(const PartitionBound&,
                         const PartitionBound&) = default;
};

// Splits [0, n) into k contiguous ranges; the first n % k ranges get one
// extra element.
inline std::vector<std::pair<std::size_t, std::size_t>> partition_ranges(
    std::size_t n, std::size_t k) {
  GQ_REQUIRE(k >= 1, "partition count must be >= 1");
  GQ_REQUIRE(k <= n, "partition count ", k, " exceeds vector length ", n);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(k);
  std::size_t base = n / k, rem = n % k, start = 0;
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t len = base + (j < rem ? 1 : 0);
    out.emplace_back(start, start + len);
    start += len;
  }
  return out;
}

struct QuantizedMessage {
  QuantizerKind kind = QuantizerKind::kDithered;
  double kappa = 0.0;  // max over partitions
  std::vector<std::int32_t> indices;
  UniformQuantizerCfg cfg;
  DitherCoordinates dither;
  std::vector<PartitionBound> partitions;

  std::size_t size() const { return indices.size(); }
};

namespace detail {

inline void check_gradient(std::span<const double> g) {
  GQ_REQUIRE(!g.empty(), "gradient must be non-empty");
  for (double x : g) {
    GQ_REQUIRE(std::isfinite(x), "gradient contains non-finite entry ", x);
  }
}

// Dithered index for one partition; u is aligned with g.
inline void dithered_indices(std::span<const double> g,
                             std::span<const double> u, double kappa,
                             const UniformQuantizerCfg& cfg,
                             std::span<std::int32_t> q) {
  if (kappa == 0.0) {
    std::fill(q.begin(), q.end(), 0);
    return;
  }
  const double m = cfg.levels_m;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double t = g[i] / kappa + u[i];
    double idx = std::clamp(round_half_away(t / cfg.delta), -m, m);
    q[i] = static_cast<std::int32_t>(idx);
  }
}

}  // namespace detail

// Encodes g against an explicit dither vector u (u[i] pairs with g[i]).
inline QuantizedMessage dithered_encode(std::span<const double> g,
                                        const UniformQuantizerCfg& cfg,
                                        std::span<const double> u,
                                        std::size_t num_partitions = 1) {
  cfg.validate();
  detail::check_gradient(g);
  GQ_REQUIRE(u.size() == g.size(), "dither length ", u.size(),
             " does not match gradient length ", g.size());
  QuantizedMessage msg;
  msg.kind = QuantizerKind::kDithered;
  msg.cfg = cfg;
  msg.indices.assign(g.size(), 0);
  for (auto [s, e] : partition_ranges(g.size(), num_partitions)) {
    double kappa = wire_scale(inf_norm(g.subspan(s, e - s)));
    detail::dithered_indices(g.subspan(s, e - s), u.subspan(s, e - s), kappa,
                             cfg, std::span(msg.indices).subspan(s, e - s));
    msg.partitions.push_back({s, e, kappa});
    msg.kappa = std::max(msg.kappa, kappa);
  }
  return msg;
}

inline QuantizedMessage dithered_encode(const GradientVector& g,
                                        const UniformQuantizerCfg& cfg,
                                        const DitherCoordinates& dither) {
  cfg.validate();
  std::vector<double> u(g.size());
  fill_dither(dither, cfg.delta, u);
  auto msg = dithered_encode(g.view(), cfg, u);
  msg.dither = dither;
  return msg;
}

inline QuantizedMessage partition_encode(const GradientVector& g,
                                         std::size_t k,
                                         const UniformQuantizerCfg& cfg,
                                         const DitherCoordinates& dither) {
  cfg.validate();
  GQ_REQUIRE(k >= 1 && k <= g.size(), "partition count ", k,
             " must lie in [1, ", g.size(), "]");
  std::vector<double> u(g.size());
  fill_dither(dither, cfg.delta, u);
  auto msg = dithered_encode(g.view(), cfg, u, k);
  msg.dither = dither;
  return msg;
}

// g~_i = kappa_j (delta q_i - u_i) for i in partition j.
inline GradientVector dithered_decode(const QuantizedMessage& msg,
                                      std::span<const double> u) {
  GQ_REQUIRE(u.size() == msg.indices.size(), "dither length ", u.size(),
             " does not match message length ", msg.indices.size());
  std::vector<double> out(msg.indices.size());
  const double delta = msg.cfg.delta;
  for (const auto& p : msg.partitions) {
    for (std::size_t i = p.start; i < p.end; ++i) {
      out[i] = p.kappa * (delta * msg.indices[i] - u[i]);
    }
  }
  return GradientVector(std::move(out));
}

inline GradientVector dithered_decode(const QuantizedMessage& msg,
                                      const DitherCoordinates& dither) {
  if (msg.kind != QuantizerKind::kDithered) {
    throw ProtocolError("dithered_decode: message is not dithered");
  }
  if (!(msg.dither == dither)) {
    throw ProtocolError(detail::concat(
        "dither coordinates mismatch: message (", msg.dither.seed, ", ",
        msg.dither.round, ") vs decoder (", dither.seed, ", ", dither.round,
        ")"));
  }
  std::vector<double> u(msg.size());
  fill_dither(dither, msg.cfg.delta, u);
  return dithered_decode(msg, std::span<const double>(u));
}

// Decoder that also checks the sender used the expected configuration.
inline GradientVector dithered_decode(const QuantizedMessage& msg,
                                      const UniformQuantizerCfg& expected,
                                      const DitherCoordinates& dither) {
  if (!(msg.cfg == expected)) {
    throw ProtocolError(detail::concat(
        "quantizer config mismatch: message (delta=", msg.cfg.delta,
        ", M=", msg.cfg.levels_m, ") vs decoder (delta=", expected.delta,
        ", M=", expected.levels_m, ")"));
  }
  return dithered_decode(msg, dither);
}

// Q(x + u) with no dither subtraction.
inline double half_dithered_quantize(double x, const UniformQuantizerCfg& cfg,
                                     double u) {
  return uniform_quantize(x + u, cfg.delta);
}

// Stochastic rounding to the two neighbouring levels l/M and (l+1)/M of |x|.
// `rand` is a unit-uniform sample in [0, 1).
inline double stochastic_quantize(double x, int m, double rand) {
  GQ_REQUIRE(m >= 1, "levels must be >= 1, got ", m);
  GQ_REQUIRE(std::isfinite(x) && std::abs(x) <= 1.0,
             "stochastic_quantize expects |x| <= 1, got ", x);
  const double ax = std::abs(x);
  const double lo = std::min(std::floor(ax * m), static_cast<double>(m));
  const double p_lo = lo + 1.0 - m * ax;
  const double level = rand < p_lo ? lo : lo + 1.0;
  return std::copysign(level / m, x);
}

inline double stochastic_variance(double x, int m) {
  GQ_REQUIRE(m >= 1, "levels must be >= 1, got ", m);
  GQ_REQUIRE(std::isfinite(x) && std::abs(x) <= 1.0,
             "stochastic_variance expects |x| <= 1, got ", x);
  const double ax = std::abs(x);
  const double lo = std::min(std::floor(ax * m), static_cast<double>(m));
  return (ax - lo / m) * ((lo + 1.0) / m - ax);
}

// QSGD-style vector encoding (TernGrad when m == 1). Random draws come from
// the addressed stream so the encoding is reproducible.
inline QuantizedMessage stochastic_encode(const GradientVector& g, int m,
                                          const DitherCoordinates& coords) {
  detail::check_gradient(g.view());
  auto cfg = UniformQuantizerCfg::with_levels(m);
  QuantizedMessage msg;
  msg.kind = QuantizerKind::kStochastic;
  msg.cfg = cfg;
  msg.dither = coords;
  msg.kappa = wire_scale(inf_norm(g.view()));
  msg.partitions.push_back({0, g.size(), msg.kappa});
  msg.indices.assign(g.size(), 0);
  if (msg.kappa == 0.0) return msg;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double x = std::clamp(g[i] / msg.kappa, -1.0, 1.0);
    double level = stochastic_quantize(x, m, unit_at(coords, i));
    msg.indices[i] = static_cast<std::int32_t>(std::lround(level * m));
  }
  return msg;
}

// kappa * q / M; no dither is subtracted.
inline GradientVector stochastic_decode(const QuantizedMessage& msg) {
  if (msg.kind != QuantizerKind::kStochastic) {
    throw ProtocolError("stochastic_decode: message is not stochastic");
  }
  std::vector<double> out(msg.size());
  for (const auto& p : msg.partitions) {
    for (std::size_t i = p.start; i < p.end; ++i) {
      out[i] = p.kappa * msg.indices[i] * msg.cfg.delta;
    }
  }
  return GradientVector(std::move(out));
}

// ---------------------------------------------------------------------------
// One-bit baseline: sign bits plus two conditional means, with the
// quantisation residual fed back into the next round. Not a method from the
// dithered-quantisation family; it exists for comparison only.

struct OneBitState {
  GradientVector residual;

  explicit OneBitState(std::size_t n = 0) : residual(GradientVector::zeros(n)) {}
};

struct OneBitMessage {
  std::vector<std::uint8_t> bits;  // 1 where v_i >= 0
  double mu_pos = 0.0;
  double mu_neg = 0.0;

  GradientVector reconstruct() const {
    std::vector<double> out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      out[i] = bits[i] ? mu_pos : mu_neg;
    }
    return GradientVector(std::move(out));
  }
};

inline OneBitMessage onebit_encode(const GradientVector& g,
                                   OneBitState& state) {
  detail::check_gradient(g.view());
  if (state.residual.size() != g.size()) {
    GQ_REQUIRE(state.residual.size() == 0, "one-bit residual length ",
               state.residual.size(), " does not match gradient length ",
               g.size());
    state.residual = GradientVector::zeros(g.size());
  }
  const std::size_t n = g.size();
  std::vector<double> v(n);
  OneBitMessage msg;
  msg.bits.resize(n);
  double sum_pos = 0.0, sum_neg = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = g[i] + state.residual[i];
    if (v[i] >= 0.0) {
      msg.bits[i] = 1;
      sum_pos += v[i];
      ++n_pos;
    } else {
      sum_neg += v[i];
      ++n_neg;
    }
  }
  msg.mu_pos = n_pos ? sum_pos / static_cast<double>(n_pos) : 0.0;
  msg.mu_neg = n_neg ? sum_neg / static_cast<double>(n_neg) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    state.residual[i] = v[i] - (msg.bits[i] ? msg.mu_pos : msg.mu_neg);
  }
  return msg;
}

// ---------------------------------------------------------------------------

struct ExcessVarianceBounds {
  double second_moment = 0.0;  // n delta^2 / 12 * E||g||^2
  double gaussian = 0.0;       // Gaussian-noise model, single partition
  double partitioned = 0.0;    // Gaussian-noise model, k partitions
};

// var_sg is E||g - grad L||^2, e_g_sq is E||g||^2, grad_inf_norm is
// ||grad L||_inf.
inline ExcessVarianceBounds excess_variance_bound(std::size_t n, double delta,
                                                  double var_sg, double e_g_sq,
                                                  double grad_inf_norm,
                                                  std::size_t k = 1) {
  GQ_REQUIRE(n >= 1 && k >= 1, "n and k must be >= 1");
  GQ_REQUIRE(delta >= 0.0 && var_sg >= 0.0 && e_g_sq >= 0.0 &&
                 grad_inf_norm >= 0.0,
             "excess_variance_bound inputs must be nonnegative");
  const double nd = static_cast<double>(n);
  const double d2 = delta * delta;
  const double inf2 = grad_inf_norm * grad_inf_norm;
  ExcessVarianceBounds b;
  b.second_moment = nd * d2 / 12.0 * e_g_sq;
  b.gaussian = d2 / 3.0 * std::log(std::sqrt(2.0) * nd) * var_sg +
               nd * d2 / 6.0 * inf2;
  b.partitioned =
      d2 / 6.0 *
      (2.0 * std::log(std::sqrt(2.0) * nd / static_cast<double>(k)) * var_sg +
       nd * inf2);
  return b;
}

}  // namespace gradquant
