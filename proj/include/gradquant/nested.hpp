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

// Nested dithered quantization with decoder side information.
//
// A fine quantizer Q1 (step delta1) and a coarse quantizer Q2 (step
// delta2 = k * delta1) are nested: every coarse point is also a fine point.
// The encoder sends only the fine index modulo the coarse bin, which needs
// log2(k) bits per value. The decoder picks, among all fine points carrying
// that residue, the one in the same coarse bin as its side information y.
//
// Relative indices are the residue of the fine index mod k, mapped to the
// centred set {-(k-1)/2 .. (k-1)/2} for odd k and {-k/2+1 .. k/2} for even
// k. Away from rounding ties this equals (Q1(t) - Q2(t)) / delta1.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gradquant/common.hpp"
#include "gradquant/dither.hpp"
#include "gradquant/quantizer.hpp"

namespace gradquant {

struct NestedConfig {
  double delta1 = 1.0 / 3.0;
  int nesting_k = 3;
  double alpha = 1.0;

  double delta2() const { return nesting_k * delta1; }
  void validate() const {
    GQ_REQUIRE(delta1 > 0.0 && std::isfinite(delta1),
               "nested delta1 must be positive, got ", delta1);
    GQ_REQUIRE(nesting_k >= 2, "nesting factor k must be >= 2, got ",
               nesting_k);
    GQ_REQUIRE(alpha > 0.0 && alpha <= 1.0,
               "shrinkage alpha must lie in (0, 1], got ", alpha);
  }
  int min_index() const { return -((nesting_k - 1) / 2); }
  int max_index() const { return nesting_k / 2; }

  friend bool operator==(const NestedConfig&, const NestedConfig&) = default;
};

struct SideInfoModel {
  double sigma_z = 0.0;
};

struct NestedMessage {
  std::vector<std::int32_t> rel_indices;
  NestedConfig cfg;
  DitherCoordinates dither;
  double kappa = 0.0;

  std::size_t size() const { return rel_indices.size(); }
};

namespace detail {

inline std::int32_t centred_residue(std::int64_t fine_index, int k) {
  std::int64_t r = fine_index % k;
  if (r < 0) r += k;
  if (r > k / 2) r -= k;
  return static_cast<std::int32_t>(r);
}

}  // namespace detail

inline std::int32_t nested_encode(double x, const NestedConfig& cfg,
                                  double u) {
  cfg.validate();
  GQ_REQUIRE(std::isfinite(x) && std::isfinite(u),
             "nested_encode: non-finite input");
  const double t = cfg.alpha * x + u;
  const auto fine = static_cast<std::int64_t>(round_half_away(t / cfg.delta1));
  return detail::centred_residue(fine, cfg.nesting_k);
}

// x^ = y + alpha (r - Q2(r)),  r = s delta1 - u - alpha y.
inline double nested_decode(std::int32_t s, double y, const NestedConfig& cfg,
                            double u) {
  cfg.validate();
  const double r = s * cfg.delta1 - u - cfg.alpha * y;
  return y + cfg.alpha * (r - uniform_quantize(r, cfg.delta2()));
}

// Encoder-side oracle: true when the decoder, given side information y,
// lands in a different coarse bin than the source. Needs x, so only a
// simulator or test can evaluate it.
inline bool nested_decode_failed(double x, double y, const NestedConfig& cfg,
                                 double u) {
  const double t = cfg.alpha * x + u;
  const double e = t - uniform_quantize(t, cfg.delta1);
  return uniform_quantize(cfg.alpha * (x - y) - e, cfg.delta2()) != 0.0;
}

// Shrinkage that keeps the no-failure MSE equal to delta1^2 / 12.
inline double alpha_optimal(double delta1, double sigma_z) {
  GQ_REQUIRE(delta1 > 0.0, "delta1 must be positive");
  const double s2 = sigma_z * sigma_z;
  const double floor = delta1 * delta1 / 12.0;
  GQ_REQUIRE(s2 > floor, "alpha_optimal requires sigma_z^2 > delta1^2/12 (",
             s2, " <= ", floor, "); use alpha = 1");
  return std::sqrt(1.0 - floor / s2);
}

// Upper bound on Pr(|alpha z + u| > delta2 / 2), clipped to [0, 1].
// `z_bound`, when given, asserts |z| < z_bound almost surely; if that bound
// is within (delta2 - delta1) / (2 alpha), failure is impossible.
inline double failure_prob_bound(const NestedConfig& cfg,
                                 const SideInfoModel& model,
                                 std::optional<double> z_bound = std::nullopt) {
  cfg.validate();
  GQ_REQUIRE(model.sigma_z >= 0.0, "sigma_z must be nonnegative");
  const double d1 = cfg.delta1, d2 = cfg.delta2(), a = cfg.alpha;
  if (z_bound && *z_bound <= (d2 - d1) / (2.0 * a)) return 0.0;
  const double p = d1 * d1 / (3.0 * d2 * d2) +
                   4.0 * a * a * model.sigma_z * model.sigma_z / (d2 * d2);
  return std::clamp(p, 0.0, 1.0);
}

// No-failure mean squared error per element.
inline double nested_mse(const NestedConfig& cfg, const SideInfoModel& model) {
  const double a2 = cfg.alpha * cfg.alpha;
  const double shrink = 1.0 - a2;
  return a2 * cfg.delta1 * cfg.delta1 / 12.0 +
         shrink * shrink * model.sigma_z * model.sigma_z;
}

// Element-wise nested encoding of g / kappa with dither step delta1.
inline NestedMessage nested_encode_vector(const GradientVector& g, double kappa,
                                          const NestedConfig& cfg,
                                          const DitherCoordinates& dither) {
  cfg.validate();
  detail::check_gradient(g.view());
  GQ_REQUIRE(kappa > 0.0 && std::isfinite(kappa),
             "nested encoding needs a positive scale factor, got ", kappa);
  NestedMessage msg;
  msg.cfg = cfg;
  msg.dither = dither;
  msg.kappa = kappa;
  msg.rel_indices.resize(g.size());
  std::vector<double> u(g.size());
  fill_dither(dither, cfg.delta1, u);
  for (std::size_t i = 0; i < g.size(); ++i) {
    msg.rel_indices[i] = nested_encode(g[i] / kappa, cfg, u[i]);
  }
  return msg;
}

// Decodes against unnormalised side information y (same units as g).
inline GradientVector nested_decode_vector(const NestedMessage& msg,
                                           std::span<const double> side_info) {
  GQ_REQUIRE(side_info.size() == msg.size(), "side information length ",
             side_info.size(), " does not match message length ", msg.size());
  GQ_REQUIRE(msg.kappa > 0.0, "nested message carries no scale factor");
  std::vector<double> u(msg.size());
  fill_dither(msg.dither, msg.cfg.delta1, u);
  std::vector<double> out(msg.size());
  for (std::size_t i = 0; i < msg.size(); ++i) {
    out[i] = msg.kappa * nested_decode(msg.rel_indices[i],
                                       side_info[i] / msg.kappa, msg.cfg, u[i]);
  }
  return GradientVector(std::move(out));
}

// Number of elements whose decode with `side_info` is a failure.
inline std::size_t count_decode_failures(const GradientVector& g,
                                         std::span<const double> side_info,
                                         double kappa, const NestedConfig& cfg,
                                         const DitherCoordinates& dither) {
  std::vector<double> u(g.size());
  fill_dither(dither, cfg.delta1, u);
  std::size_t failures = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    failures += nested_decode_failed(g[i] / kappa, side_info[i] / kappa, cfg,
                                     u[i]);
  }
  return failures;
}

}  // namespace gradquant
