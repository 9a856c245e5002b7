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

// Optimizers (SGD, Adam), learning-rate schedules, and the closed-form
// horizon / step-size calculator for distributed dithered SGD.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gradquant/common.hpp"
#include "gradquant/problems.hpp"

namespace gradquant {

enum class OptimizerKind { kSgd, kAdam };
enum class LrSchedule { kConstant, kInverseTime };

struct OptState {
  std::vector<double> w;
  OptimizerKind kind = OptimizerKind::kSgd;
  LrSchedule schedule = LrSchedule::kConstant;
  double lr = 0.01;
  double epoch_decay = 0.98;
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;  // updates applied so far
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<double> m, v;

  // Step size for the next update.
  double current_lr() const {
    double eta = lr * std::pow(epoch_decay, static_cast<double>(epoch));
    if (schedule == LrSchedule::kInverseTime) {
      eta /= static_cast<double>(step + 1);
    }
    return eta;
  }
  void end_epoch() { ++epoch; }
};

inline OptState make_sgd(std::vector<double> w, double lr,
                         LrSchedule schedule = LrSchedule::kConstant) {
  OptState s;
  s.w = std::move(w);
  s.lr = lr;
  s.schedule = schedule;
  s.kind = OptimizerKind::kSgd;
  return s;
}

inline OptState make_adam(std::vector<double> w, double lr) {
  OptState s;
  s.w = std::move(w);
  s.lr = lr;
  s.kind = OptimizerKind::kAdam;
  s.m.assign(s.w.size(), 0.0);
  s.v.assign(s.w.size(), 0.0);
  return s;
}

namespace detail {

inline void check_update(const OptState& s, std::span<const double> g) {
  GQ_REQUIRE(g.size() == s.w.size(), "gradient length ", g.size(),
             " does not match parameter length ", s.w.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw TrainingAborted(detail::concat("non-finite gradient entry ", g[i],
                                           " at index ", i, ", step ",
                                           s.step));
    }
  }
}

}  // namespace detail

inline void sgd_step(OptState& s, std::span<const double> g) {
  detail::check_update(s, g);
  const double eta = s.current_lr();
  for (std::size_t i = 0; i < g.size(); ++i) s.w[i] -= eta * g[i];
  ++s.step;
}

inline void adam_step(OptState& s, std::span<const double> g) {
  detail::check_update(s, g);
  if (s.m.size() != s.w.size()) {
    s.m.assign(s.w.size(), 0.0);
    s.v.assign(s.w.size(), 0.0);
  }
  const double eta = s.current_lr();
  const double t = static_cast<double>(s.step + 1);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    s.w[i] -= eta * mhat / (std::sqrt(vhat) + s.eps);
  }
  ++s.step;
}

inline void optimizer_step(OptState& s, std::span<const double> g) {
  if (s.kind == OptimizerKind::kAdam) {
    adam_step(s, g);
  } else {
    sgd_step(s, g);
  }
}

// ---------------------------------------------------------------------------

struct HorizonInputs {
  double radius = 1.0;   // R = sup ||w - w0||
  double epsilon = 0.01;
  double sigma_sq = 1.0; // V (1 + n delta^2/12) + n B delta^2/12
  double workers = 1.0;
  double ell = 1.0;
};

// sigma^2 for the horizon calculator. `grad_bound` bounds ||grad L||^2.
inline double quantized_sg_variance(double v, double grad_bound, std::size_t n,
                                    double delta) {
  const double q = static_cast<double>(n) * delta * delta / 12.0;
  return v * (1.0 + q) + grad_bound * q;
}

struct Horizon {
  std::uint64_t rounds = 0;
  double eta = 0.0;
  // Set when epsilon is not below 0.2 sigma^2 / (P ell), the regime in
  // which the horizon guarantee is stated.
  bool epsilon_too_large = false;
};

inline Horizon training_horizon(const HorizonInputs& h) {
  GQ_REQUIRE(h.radius > 0.0 && h.epsilon > 0.0 && h.sigma_sq > 0.0 &&
                 h.workers > 0.0 && h.ell > 0.0,
             "training_horizon inputs must be positive");
  Horizon out;
  const double per_worker = h.sigma_sq / h.workers;
  out.rounds = static_cast<std::uint64_t>(std::ceil(
      2.5 * h.radius * h.radius * per_worker / (h.epsilon * h.epsilon) -
      1e-9));
  out.eta = h.epsilon / (h.epsilon * h.ell + 1.1 * per_worker);
  out.epsilon_too_large = h.epsilon >= 0.2 * per_worker / h.ell;
  return out;
}

// Relative increase of the horizon caused by quantization.
inline double excess_time_ratio(std::size_t n, double delta, double b_over_v) {
  GQ_REQUIRE(delta >= 0.0 && b_over_v >= 0.0,
             "excess_time_ratio inputs must be nonnegative");
  return static_cast<double>(n) * delta * delta / 12.0 * (1.0 + b_over_v);
}

// Second-moment constants (A', B') for E||g~||^2 <= A' + B' ||w - w*||^2.
inline std::pair<double, double> bounded_sg_constants(double a, double b,
                                                      std::size_t n,
                                                      double delta) {
  GQ_REQUIRE(a >= 0.0 && b >= 0.0, "A and B must be nonnegative");
  const double f = 1.0 + static_cast<double>(n) * delta * delta / 12.0;
  return {f * a, f * b};
}

// Monte-Carlo estimates of the oracle's moments at w.
struct OracleMoments {
  double variance = 0.0;       // E||sg - grad||^2  (V)
  double grad_sq_norm = 0.0;   // ||grad L(w)||^2    (B)
  double second_moment = 0.0;  // E||sg||^2
};

inline OracleMoments estimate_oracle_moments(const Problem& p,
                                             std::span<const double> w,
                                             std::size_t batch,
                                             std::size_t calls,
                                             std::uint64_t seed) {
  GQ_REQUIRE(calls >= 2, "need at least two oracle calls");
  const auto grad = p.exact_grad(w);
  std::vector<double> g(p.dim());
  std::vector<std::size_t> idx(p.dataset_size() ? batch : 0);
  std::mt19937_64 rng(seed);
  OracleMoments m;
  m.grad_sq_norm = squared_norm(grad.view());
  for (std::size_t c = 0; c < calls; ++c) {
    if (!idx.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, p.dataset_size() - 1);
      for (auto& i : idx) i = pick(rng);
    }
    p.stochastic_gradient(w, MiniBatch{rng(), idx, batch}, g);
    m.variance += squared_distance(g, grad.view());
    m.second_moment += squared_norm(g);
  }
  m.variance /= static_cast<double>(calls);
  m.second_moment /= static_cast<double>(calls);
  return m;
}

}  // namespace gradquant
