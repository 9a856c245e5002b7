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

// Statistical verification suite. Every check records the statistic it
// measured, the threshold it was compared against and a verdict. The suite
// is deterministic: all randomness is drawn from fixed seeds.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gradquant/codec.hpp"
#include "gradquant/dither.hpp"
#include "gradquant/nested.hpp"
#include "gradquant/quantizer.hpp"
#include "gradquant/stats.hpp"

namespace gradquant {

struct CheckResult {
  std::string name;
  std::string description;
  double statistic = 0.0;
  double threshold = 0.0;
  std::string relation;  // how statistic is compared with threshold
  bool pass = false;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 20190101;
  DitherConstants dither;  // override to run a negative control
  std::size_t distribution_samples = 1'000'000;
  std::size_t grid_samples = 100'000;
};

namespace detail {

inline std::vector<double> dither_samples(std::uint64_t seed, std::uint64_t round,
                                          std::size_t n, double delta,
                                          const DitherConstants& k) {
  std::vector<double> u(n);
  fill_dither({seed, round}, delta, u, 0, k);
  return u;
}

// Normalised dithered-quantization errors (g~ - g) / kappa and inputs g / kappa
// for `rounds` Gaussian gradients of length `n`.
struct ErrorSamples {
  std::vector<double> errors;
  std::vector<double> inputs;
};

inline ErrorSamples dithered_errors(std::uint64_t seed, std::size_t n,
                                    std::size_t rounds,
                                    const UniformQuantizerCfg& cfg,
                                    const DitherConstants& k) {
  ErrorSamples out;
  out.errors.reserve(n * rounds);
  out.inputs.reserve(n * rounds);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> g(n), u(n);
  for (std::size_t t = 0; t < rounds; ++t) {
    for (auto& x : g) x = normal(rng);
    fill_dither({seed, t}, cfg.delta, u, 0, k);
    auto msg = dithered_encode(g, cfg, u);
    auto rec = dithered_decode(msg, std::span<const double>(u));
    for (std::size_t i = 0; i < n; ++i) {
      out.errors.push_back((rec[i] - g[i]) / msg.kappa);
      out.inputs.push_back(g[i] / msg.kappa);
    }
  }
  return out;
}

inline double grid_point(std::size_t j, std::size_t points) {
  return -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(points - 1);
}

}  // namespace detail

class VerificationSuite {
 public:
  explicit VerificationSuite(VerifyOptions opt = {}) : opt_(opt) {}

  std::vector<CheckResult> run() {
    results_.clear();
    harness_controls();
    dither_checks();
    dithered_error_checks();
    half_dithered_checks();
    stochastic_checks();
    excess_variance_checks();
    nested_checks();
    coder_checks();
    return results_;
  }

 private:
  template <typename F>
  void record(std::string name, std::string description, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    CheckResult r = body();
    r.name = std::move(name);
    r.description = std::move(description);
    r.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    results_.push_back(std::move(r));
  }

  static CheckResult below(double stat, double threshold) {
    return {"", "", stat, threshold, "<", stat < threshold, 0.0};
  }
  static CheckResult at_most(double stat, double threshold) {
    return {"", "", stat, threshold, "<=", stat <= threshold, 0.0};
  }
  static CheckResult at_least(double stat, double threshold) {
    return {"", "", stat, threshold, ">=", stat >= threshold, 0.0};
  }

  void harness_controls() {
    const std::size_t n = 100'000;
    record("harness_uniform_control",
           "KS accepts genuine U[-0.5,0.5] samples", [&] {
             std::mt19937_64 rng(opt_.seed ^ 1);
             std::uniform_real_distribution<double> uni(-0.5, 0.5);
             std::vector<double> x(n);
             for (auto& v : x) v = uni(rng);
             auto ks = stats::ks_uniform(x, -0.5, 0.5);
             return below(ks.statistic, ks.threshold);
           });
    record("harness_gaussian_control",
           "KS rejects Gaussian samples against U[-0.5,0.5]", [&] {
             std::mt19937_64 rng(opt_.seed ^ 2);
             std::normal_distribution<double> normal(0.0, 0.25);
             std::vector<double> x(n);
             for (auto& v : x) v = normal(rng);
             auto ks = stats::ks_uniform(x, -0.5, 0.5);
             return at_least(ks.statistic, ks.threshold);
           });
  }

  void dither_checks() {
    const std::size_t n = opt_.distribution_samples;
    const double delta = 0.5;
    record("dither_uniformity",
           "dither samples pass KS against U[-delta/2, delta/2]", [&] {
             auto u = detail::dither_samples(opt_.seed, 0, n, delta,
                                             opt_.dither);
             auto ks = stats::ks_uniform(u, -delta / 2, delta / 2);
             return below(ks.statistic, ks.threshold);
           });
    record("dither_round_decorrelation",
           "|corr(u at round t, u at round t+1)| < 0.01", [&] {
             auto a = detail::dither_samples(opt_.seed, 7, n, delta,
                                             opt_.dither);
             auto b = detail::dither_samples(opt_.seed, 8, n, delta,
                                             opt_.dither);
             auto c = stats::pearson(a, b);
             return below(c.degenerate ? 1.0 : std::abs(c.r), 0.01);
           });
  }

  void dithered_error_checks() {
    const auto cfg = UniformQuantizerCfg::with_levels(2);
    const std::size_t n = 1000;
    const std::size_t rounds = opt_.distribution_samples / n;
    auto s = detail::dithered_errors(opt_.seed ^ 3, n, rounds, cfg,
                                     opt_.dither);
    const double N = static_cast<double>(s.errors.size());
    record("dithered_error_uniformity",
           "normalised dithered errors pass KS against U[-delta/2, delta/2]",
           [&] {
             auto ks = stats::ks_uniform(s.errors, -cfg.delta / 2,
                                         cfg.delta / 2);
             return below(ks.statistic, ks.threshold);
           });
    record("dithered_error_independence",
           "|corr(error, input)| < 0.01", [&] {
             auto c = stats::independence_check(s.errors, s.inputs);
             return below(c.degenerate ? 1.0 : std::abs(c.r), 0.01);
           });
    record("dithered_error_second_moment",
           "|E[e^2] - delta^2/12| within 3 standard errors", [&] {
             auto est = stats::raw_moment_estimate(s.errors, 2);
             const double target = cfg.delta * cfg.delta / 12.0;
             return at_most(std::abs(est.value - target), 3.0 * est.std_error);
           });
    record("dithered_unbiasedness",
           "|mean error| within 4 (delta/2)/sqrt(N)", [&] {
             double mean = 0.0;
             for (double e : s.errors) mean += e;
             mean /= N;
             return at_most(std::abs(mean), 4.0 * (cfg.delta / 2) / std::sqrt(N));
           });
  }

  void half_dithered_checks() {
    const int m = 2;
    const auto cfg = UniformQuantizerCfg::with_levels(m);
    const std::size_t points = 101;
    const std::size_t per_x = opt_.grid_samples;
    record("stochastic_dither_equivalence_tv",
           "max over a 101-point x grid of TV(half-dithered, stochastic) < 0.01",
           [&] {
             double worst = 0.0;
             std::mt19937_64 rng(opt_.seed ^ 4);
             std::uniform_real_distribution<double> unit(0.0, 1.0);
             for (std::size_t j = 0; j < points; ++j) {
               const double x = detail::grid_point(j, points);
               std::map<long, std::size_t> hd, sq;
               for (std::size_t s = 0; s < per_x; ++s) {
                 const double u = (unit(rng) - 0.5) * cfg.delta;
                 ++hd[std::lround(half_dithered_quantize(x, cfg, u) * m)];
                 ++sq[std::lround(stochastic_quantize(x, m, unit(rng)) * m)];
               }
               worst = std::max(worst, stats::total_variation(
                                           stats::normalize_counts(hd),
                                           stats::normalize_counts(sq)));
             }
             return below(worst, 0.01);
           });
    record("half_dithered_second_moment_average",
           "E over x~U[-1,1] of E[(Q(x+u)-x)^2] within 2% of delta^2/6", [&] {
             std::mt19937_64 rng(opt_.seed ^ 5);
             std::uniform_real_distribution<double> unit(0.0, 1.0);
             const std::size_t n = opt_.distribution_samples;
             double acc = 0.0;
             for (std::size_t s = 0; s < n; ++s) {
               const double x = 2.0 * unit(rng) - 1.0;
               const double u = (unit(rng) - 0.5) * cfg.delta;
               const double e = half_dithered_quantize(x, cfg, u) - x;
               acc += e * e;
             }
             const double target = cfg.delta * cfg.delta / 6.0;
             return below(std::abs(acc / n / target - 1.0), 0.02);
           });
    record("half_dithered_triangular_moment",
           "triangular dither: max over 21 x of |E[e^2] - delta^2/4| / SE < 3.5",
           [&] {
             std::mt19937_64 rng(opt_.seed ^ 6);
             std::uniform_real_distribution<double> unit(0.0, 1.0);
             const double target = 3.0 * cfg.delta * cfg.delta / 12.0;
             double worst = 0.0;
             std::vector<double> e2(per_x);
             for (std::size_t j = 0; j < 21; ++j) {
               const double x = detail::grid_point(j, 21);
               for (auto& v : e2) {
                 const double u =
                     (unit(rng) + unit(rng) - 1.0) * cfg.delta;
                 const double e = uniform_quantize(x + u, cfg.delta) - x;
                 v = e * e;
               }
               auto est = stats::moment_estimate(e2, 1);
               worst = std::max(worst,
                                std::abs(est.value - target) / est.std_error);
             }
             return below(worst, 3.5);
           });
    record("half_dithered_error_not_uniform",
           "half-dithered error at x=0.3 is rejected by KS-uniform", [&] {
             std::mt19937_64 rng(opt_.seed ^ 7);
             std::uniform_real_distribution<double> unit(0.0, 1.0);
             std::vector<double> e(opt_.distribution_samples);
             for (auto& v : e) {
               const double u = (unit(rng) - 0.5) * cfg.delta;
               v = half_dithered_quantize(0.3, cfg, u) - 0.3;
             }
             auto ks = stats::ks_uniform(e, -cfg.delta / 2, cfg.delta / 2);
             return at_least(ks.statistic, ks.threshold);
           });
  }

  void stochastic_checks() {
    const int m = 2;
    const std::size_t points = 101;
    const std::size_t per_x = opt_.grid_samples;
    record("stochastic_variance_grid",
           "per-x empirical variance matches (|x|-l/M)((l+1)/M-|x|): max "
           "|deviation|/SE over 101 points < 3",
           [&] {
             std::mt19937_64 rng(opt_.seed ^ 8);
             std::uniform_real_distribution<double> unit(0.0, 1.0);
             std::vector<double> q(per_x);
             double worst = 0.0;
             for (std::size_t j = 0; j < points; ++j) {
               const double x = detail::grid_point(j, points);
               for (auto& v : q) v = stochastic_quantize(x, m, unit(rng));
               auto est = stats::moment_estimate(q, 2);
               const double target = stochastic_variance(x, m);
               const double dev = std::abs(est.value - target);
               if (est.std_error == 0.0) {
                 if (dev > 1e-12) worst = std::max(worst, 1e9);
                 continue;
               }
               worst = std::max(worst, dev / est.std_error);
             }
             return below(worst, 3.0);
           });
    record("stochastic_variance_average",
           "average variance over x~U[-1,1] within 2% of 1/(6M^2)", [&] {
             std::mt19937_64 rng(opt_.seed ^ 9);
             std::uniform_real_distribution<double> unit(0.0, 1.0);
             const std::size_t n = opt_.distribution_samples;
             double acc = 0.0;
             for (std::size_t s = 0; s < n; ++s) {
               const double x = 2.0 * unit(rng) - 1.0;
               const double e = stochastic_quantize(x, m, unit(rng)) - x;
               acc += e * e;
             }
             const double target = 1.0 / (6.0 * m * m);
             return below(std::abs(acc / n / target - 1.0), 0.02);
           });
  }

  void excess_variance_checks() {
    const std::size_t n = 100;
    const std::size_t trials = 10'000;
    auto excess = [&](double delta, std::uint64_t salt, double* e_g_sq) {
      std::mt19937_64 rng(opt_.seed ^ salt);
      std::normal_distribution<double> normal(0.0, 1.0);
      UniformQuantizerCfg cfg{delta, static_cast<int>(std::lround(1.0 / delta))};
      std::vector<double> g(n), u(n);
      double acc = 0.0, gsq = 0.0;
      for (std::size_t t = 0; t < trials; ++t) {
        for (auto& x : g) x = 0.3 + normal(rng);
        fill_dither({opt_.seed ^ salt, t}, delta, u, 0, opt_.dither);
        auto rec = dithered_decode(dithered_encode(g, cfg, u),
                                   std::span<const double>(u));
        acc += squared_distance(rec.view(), g);
        gsq += squared_norm(g);
      }
      if (e_g_sq) *e_g_sq = gsq / trials;
      return acc / trials;
    };
    double e_g_sq = 0.0;
    const double v1 = excess(0.5, 10, &e_g_sq);
    const double v2 = excess(0.25, 11, nullptr);
    record("excess_variance_second_moment_bound",
           "E||g~-g||^2 <= n delta^2/12 E||g||^2 on Gaussian gradients", [&] {
             auto b = excess_variance_bound(n, 0.5, 0.0, e_g_sq, 0.0, 1);
             return at_most(v1, b.second_moment);
           });
    record("excess_variance_halving",
           "halving delta divides excess variance by 4 within 10%", [&] {
             return below(std::abs(v1 / v2 / 4.0 - 1.0), 0.10);
           });
  }

  void nested_checks() {
    record("nested_conditional_mse",
           "no-failure MSE within 2% of alpha^2 delta1^2/12 + (1-alpha^2)^2 "
           "sigma_z^2",
           [&] {
             const double sigma_z = std::sqrt(1.0 / 6.0);
             NestedConfig cfg{1.0, 7, alpha_optimal(1.0, sigma_z)};
             std::mt19937_64 rng(opt_.seed ^ 12);
             std::normal_distribution<double> normal(0.0, sigma_z);
             std::uniform_real_distribution<double> unit(0.0, 1.0);
             double acc = 0.0;
             std::size_t kept = 0;
             for (std::size_t s = 0; s < opt_.distribution_samples; ++s) {
               const double y = 4.0 * unit(rng) - 2.0;
               const double x = y + normal(rng);
               const double u = (unit(rng) - 0.5) * cfg.delta1;
               if (nested_decode_failed(x, y, cfg, u)) continue;
               const double xh = nested_decode(nested_encode(x, cfg, u), y, cfg, u);
               acc += (xh - x) * (xh - x);
               ++kept;
             }
             const double target = nested_mse(cfg, SideInfoModel{sigma_z});
             return below(std::abs(acc / kept / target - 1.0), 0.02);
           });
    record("nested_failure_rate_grid",
           "empirical failure rate <= bound on a 3x3x3 (delta1, alpha, "
           "sigma_z) grid; statistic is max(rate - bound)",
           [&] {
             const double d1s[] = {1.0 / 3.0, 0.5, 1.0};
             const double alphas[] = {0.5, 0.8, 1.0};
             const double sigmas[] = {0.1, 0.3, 0.6};
             std::mt19937_64 rng(opt_.seed ^ 13);
             std::uniform_real_distribution<double> unit(0.0, 1.0);
             std::normal_distribution<double> normal(0.0, 1.0);
             const std::size_t n = 20'000;
             double worst = -1.0;
             for (double d1 : d1s) {
               for (double a : alphas) {
                 for (double sz : sigmas) {
                   NestedConfig cfg{d1, 3, a};
                   std::size_t fails = 0;
                   for (std::size_t s = 0; s < n; ++s) {
                     const double y = 2.0 * unit(rng) - 1.0;
                     const double x = y + sz * normal(rng);
                     const double u = (unit(rng) - 0.5) * d1;
                     fails += nested_decode_failed(x, y, cfg, u);
                   }
                   const double rate = static_cast<double>(fails) / n;
                   worst = std::max(
                       worst, rate - failure_prob_bound(cfg, SideInfoModel{sz}));
                 }
               }
             }
             return at_most(worst, 0.0);
           });
    record("nested_bounded_z_no_failure",
           "zero failures when |z| < (delta2-delta1)/(2 alpha)", [&] {
             NestedConfig cfg{1.0 / 3.0, 3, 0.9};
             const double zmax = (cfg.delta2() - cfg.delta1) / (2.0 * cfg.alpha);
             std::mt19937_64 rng(opt_.seed ^ 14);
             std::uniform_real_distribution<double> unit(0.0, 1.0);
             std::size_t fails = 0;
             for (std::size_t s = 0; s < opt_.distribution_samples; ++s) {
               const double y = 2.0 * unit(rng) - 1.0;
               const double z = (2.0 * unit(rng) - 1.0) * zmax * 0.999999;
               const double u = (unit(rng) - 0.5) * cfg.delta1;
               const double x = y + z;
               const double xh = nested_decode(nested_encode(x, cfg, u), y, cfg, u);
               const double ident =
                   x - (cfg.alpha * (cfg.alpha * x + u -
                                     uniform_quantize(cfg.alpha * x + u, cfg.delta1)) +
                        (1.0 - cfg.alpha * cfg.alpha) * z);
               fails += nested_decode_failed(x, y, cfg, u) ||
                        std::abs(xh - ident) > 1e-9;
             }
             return at_most(static_cast<double>(fails), 0.0);
           });
  }

  void coder_checks() {
    record("aac_near_entropy",
           "coded bits within 5% of empirical entropy for 1e5 i.i.d. symbols "
           "(0.9, 0.05, 0.05)",
           [&] {
             std::mt19937_64 rng(opt_.seed ^ 15);
             std::discrete_distribution<int> pick({0.05, 0.9, 0.05});
             IndexStream s;
             s.alphabet_min = -1;
             s.alphabet_max = 1;
             s.symbols.resize(100'000);
             for (auto& v : s.symbols) v = pick(rng) - 1;
             const double h = empirical_entropy(s);
             const double coded = 8.0 * aac_encode(s).size();
             return at_most(coded / h, 1.05);
           });
    record("aac_lossless_fuzz",
           "round trip is exact on 200 fuzzed streams; statistic counts "
           "mismatches",
           [&] {
             std::mt19937_64 rng(opt_.seed ^ 16);
             std::size_t bad = 0;
             for (int t = 0; t < 200; ++t) {
               const int width = 1 + static_cast<int>(rng() % 40);
               const int lo = -static_cast<int>(rng() % 20);
               std::uniform_int_distribution<int> sym(lo, lo + width - 1);
               IndexStream s;
               s.alphabet_min = lo;
               s.alphabet_max = lo + width - 1;
               s.symbols.resize(rng() % 5000);
               for (auto& v : s.symbols) v = sym(rng);
               auto back = aac_decode(aac_encode(s), s.symbols.size(),
                                      s.alphabet_min, s.alphabet_max);
               bad += back.symbols != s.symbols;
             }
             return at_most(static_cast<double>(bad), 0.0);
           });
  }

  VerifyOptions opt_;
  std::vector<CheckResult> results_;
};

inline bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.pass; });
}

}  // namespace gradquant
