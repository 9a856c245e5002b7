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

// Small statistics toolkit used to check quantizer error distributions:
// Kolmogorov-Smirnov against a uniform law, Pearson correlation, moment
// estimates with standard errors, Mann-Whitney U and total variation.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "gradquant/common.hpp"

namespace gradquant::stats {

// Asymptotic Kolmogorov critical values c(alpha); reject when D >= c / sqrt(N).
inline double ks_critical_coefficient(double alpha) {
  if (alpha == 0.01) return 1.628;
  if (alpha == 0.05) return 1.358;
  if (alpha == 0.10) return 1.224;
  GQ_REQUIRE(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  return std::sqrt(-0.5 * std::log(alpha / 2.0));
}

struct KsResult {
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

inline double ks_statistic(std::span<const double> samples,
                           const std::function<double(double)>& cdf) {
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

inline KsResult ks_uniform(std::span<const double> samples, double lo,
                           double hi, double alpha = 0.01) {
  GQ_REQUIRE(hi > lo, "ks_uniform: empty support [", lo, ", ", hi, "]");
  GQ_REQUIRE(samples.size() >= 100, "ks_uniform needs >= 100 samples, got ",
             samples.size());
  KsResult r;
  r.statistic = ks_statistic(samples, [lo, hi](double v) {
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  });
  r.threshold = ks_critical_coefficient(alpha) /
                std::sqrt(static_cast<double>(samples.size()));
  r.pass = r.statistic < r.threshold;
  return r;
}

struct Correlation {
  double r = 0.0;
  bool degenerate = false;  // one series has zero variance; r reported as 0
};

inline Correlation pearson(std::span<const double> x,
                           std::span<const double> y) {
  GQ_REQUIRE(x.size() == y.size(), "pearson: length mismatch ", x.size(),
             " vs ", y.size());
  GQ_REQUIRE(x.size() >= 2, "pearson needs at least two pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {sxy / std::sqrt(sxx * syy), false};
}

// Correlation check used on quantization errors vs inputs.
inline Correlation independence_check(std::span<const double> errors,
                                      std::span<const double> inputs) {
  GQ_REQUIRE(errors.size() == inputs.size(), "independence_check: length ",
             "mismatch ", errors.size(), " vs ", inputs.size());
  GQ_REQUIRE(errors.size() >= 100, "independence_check needs >= 100 pairs");
  return pearson(errors, inputs);
}

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;

  bool within(double target, double num_se) const {
    return std::abs(value - target) <= num_se * std_error;
  }
};

// k-th central moment (k = 1 gives the mean) with a delta-method standard
// error sqrt((m_2k - m_k^2) / N).
inline Estimate moment_estimate(std::span<const double> samples, int k) {
  GQ_REQUIRE(k >= 1 && k <= 4, "moment order must lie in [1, 4], got ", k);
  GQ_REQUIRE(samples.size() >= 100, "moment_estimate needs >= 100 samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  if (k == 1) {
    double m2 = 0.0;
    for (double s : samples) m2 += (s - mean) * (s - mean);
    return {mean, std::sqrt(m2 / n / n)};
  }
  double mk = 0.0, m2k = 0.0;
  for (double s : samples) {
    const double p = std::pow(s - mean, k);
    mk += p;
    m2k += p * p;
  }
  mk /= n;
  m2k /= n;
  return {mk, std::sqrt(std::max(0.0, m2k - mk * mk) / n)};
}

// k-th moment about zero, E[x^k], with standard error.
inline Estimate raw_moment_estimate(std::span<const double> samples, int k) {
  GQ_REQUIRE(k >= 1 && k <= 4, "moment order must lie in [1, 4], got ", k);
  GQ_REQUIRE(samples.size() >= 2, "raw_moment_estimate needs >= 2 samples");
  const double n = static_cast<double>(samples.size());
  double mk = 0.0, m2k = 0.0;
  for (double s : samples) {
    const double p = std::pow(s, k);
    mk += p;
    m2k += p * p;
  }
  mk /= n;
  m2k /= n;
  return {mk, std::sqrt(std::max(0.0, m2k - mk * mk) / n)};
}

struct SampleSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;
  double central_moments[5] = {};  // index k holds the k-th central moment
};

inline SampleSummary summarize(std::span<const double> samples) {
  GQ_REQUIRE(samples.size() >= 2, "summarize needs at least two samples");
  SampleSummary s;
  s.count = samples.size();
  const double n = static_cast<double>(s.count);
  for (double x : samples) s.mean += x;
  s.mean /= n;
  for (double x : samples) {
    const double d = x - s.mean;
    double p = d;
    for (int k = 1; k <= 4; ++k, p *= d) s.central_moments[k] += p;
  }
  for (int k = 1; k <= 4; ++k) s.central_moments[k] /= n;
  s.variance = s.central_moments[2] * n / (n - 1.0);
  return s;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct MannWhitneyResult {
  double u = 0.0;        // U statistic of the first sample
  double z = 0.0;
  double p_value = 1.0;  // two-sided, normal approximation
};

// Two-sided Mann-Whitney U test with tie correction and continuity
// correction.
inline MannWhitneyResult mann_whitney(std::span<const double> a,
                                      std::span<const double> b) {
  GQ_REQUIRE(!a.empty() && !b.empty(), "mann_whitney: empty sample");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<std::pair<double, int>> all;
  all.reserve(n);
  for (double x : a) all.emplace_back(x, 0);
  for (double x : b) all.emplace_back(x, 1);
  std::sort(all.begin(), all.end());
  double rank_sum_a = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second == 0) rank_sum_a += avg_rank;
    }
    i = j;
  }
  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb);
  const double dn = static_cast<double>(n);
  MannWhitneyResult r;
  r.u = rank_sum_a - dna * (dna + 1.0) / 2.0;
  const double mu = dna * dnb / 2.0;
  const double var =
      dna * dnb / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (var <= 0.0) return r;
  const double diff = std::abs(r.u - mu) - 0.5;
  r.z = std::max(diff, 0.0) / std::sqrt(var);
  r.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(r.z)));
  return r;
}

template <typename Key>
std::map<Key, double> normalize_counts(const std::map<Key, std::size_t>& c) {
  double total = 0.0;
  for (const auto& [k, v] : c) total += static_cast<double>(v);
  std::map<Key, double> p;
  for (const auto& [k, v] : c) p[k] = static_cast<double>(v) / total;
  return p;
}

// 1/2 sum |p - q| over the union of supports.
template <typename Key>
double total_variation(const std::map<Key, double>& p,
                       const std::map<Key, double>& q) {
  double tv = 0.0;
  for (const auto& [k, v] : p) {
    auto it = q.find(k);
    tv += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : q) {
    if (!p.count(k)) tv += v;
  }
  return 0.5 * tv;
}

}  // namespace gradquant::stats
