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


#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gradquant/nested.hpp"

namespace gradquant {
namespace {

const NestedConfig kFig{1.0, 3, 1.0};

TEST(NestedEncode, WorkedExample) {
  EXPECT_EQ(nested_encode(-4.2, kFig, 0.3), -1);
  EXPECT_EQ(nested_encode(0.0, kFig, 0.0), 0);
  EXPECT_EQ(nested_encode(2.7, kFig, 0.3), 0);
}

TEST(NestedDecode, WorkedExample) {
  EXPECT_NEAR(nested_decode(-1, -3.4, kFig, 0.3), -4.3, 1e-12);
  EXPECT_EQ(nested_decode(0, 0.0, kFig, 0.0), 0.0);
}

TEST(NestedDecode, AmbiguityDemo) {
  const std::int32_t s = nested_encode(2.7, kFig, 0.3);
  const double xhat = nested_decode(s, -3.4, kFig, 0.3);
  EXPECT_NEAR(xhat, -3.3, 1e-12);
  EXPECT_TRUE(nested_decode_failed(2.7, -3.4, kFig, 0.3));
  EXPECT_FALSE(nested_decode_failed(-4.2, -3.4, kFig, 0.3));
}

TEST(NestedConfig, IndexRangeAndValidation) {
  NestedConfig c3{0.1, 3, 1.0}, c4{0.1, 4, 1.0};
  EXPECT_EQ(c3.min_index(), -1);
  EXPECT_EQ(c3.max_index(), 1);
  EXPECT_EQ(c4.min_index(), -1);
  EXPECT_EQ(c4.max_index(), 2);
  EXPECT_DOUBLE_EQ(c3.delta2(), 0.3);
  EXPECT_THROW((NestedConfig{0.0, 3, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((NestedConfig{1.0, 1, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((NestedConfig{1.0, 3, 0.0}.validate()), InvalidArgument);
  EXPECT_THROW((NestedConfig{1.0, 3, 1.5}.validate()), InvalidArgument);
}

TEST(NestedEncode, IndicesStayInResidueRange) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 50.0);
  for (int k : {2, 3, 4, 5, 7}) {
    NestedConfig c{0.37, k, 0.8};
    for (int i = 0; i < 20000; ++i) {
      const auto s = nested_encode(nd(rng), c, 0.1);
      ASSERT_GE(s, c.min_index());
      ASSERT_LE(s, c.max_index());
    }
  }
}

// Decode identity: x^ = x - (alpha e + (1 - alpha^2) z), with z = x - y
// and e = t - Q1(t), whenever no failure occurs.
TEST(NestedDecode, IdentityHoldsWithoutFailure) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ux(-20.0, 20.0);
  std::normal_distribution<double> nz(0.0, 0.2);
  for (double alpha : {1.0, 0.9, 0.6}) {
    NestedConfig c{0.25, 5, alpha};
    int checked = 0;
    for (int i = 0; i < 50000; ++i) {
      const double x = ux(rng), z = nz(rng);
      const double u = (std::uniform_real_distribution<double>(-0.125, 0.125))(rng);
      const double y = x - z;
      const double t = alpha * x + u;
      const double e = t - c.delta1 * std::round(t / c.delta1);
      const double xhat = nested_decode(nested_encode(x, c, u), y, c, u);
      const bool ok = std::abs(xhat - (x - (alpha * e + (1 - alpha * alpha) * z))) < 1e-9;
      ASSERT_EQ(ok, !nested_decode_failed(x, y, c, u)) << x << " " << y;
      checked += ok;
    }
    EXPECT_GT(checked, 40000);
  }
}

TEST(AlphaOptimal, Examples) {
  EXPECT_NEAR(alpha_optimal(1.0, std::sqrt(1.0 / 6.0)), 0.70711, 1e-5);
  EXPECT_NEAR(alpha_optimal(1.0, 1e6), 1.0, 1e-12);
  EXPECT_THROW(alpha_optimal(1.0, std::sqrt(1.0 / 12.0)), InvalidArgument);
  EXPECT_THROW(alpha_optimal(1.0, 0.1), InvalidArgument);
  EXPECT_THROW(alpha_optimal(0.0, 1.0), InvalidArgument);
}

TEST(FailureBound, Examples) {
  EXPECT_NEAR(failure_prob_bound(kFig, {0.5}), 0.14815, 1e-5);
  // Fine step shrinking under a fixed coarse step.
  EXPECT_NEAR(failure_prob_bound(NestedConfig{1e-6, 1000000, 1.0}, {0.0}), 0.0, 1e-12);
  EXPECT_NEAR(failure_prob_bound(NestedConfig{1e-3, 1000, 1.0}, {0.0}), 1.0 / 3e6, 1e-15);
  EXPECT_EQ(failure_prob_bound(kFig, {0.5}, 0.99), 0.0);
  EXPECT_GT(failure_prob_bound(kFig, {0.5}, 1.01), 0.0);
  EXPECT_EQ(failure_prob_bound(kFig, {100.0}), 1.0);
  EXPECT_THROW(failure_prob_bound(kFig, {-1.0}), InvalidArgument);
}

TEST(FailureBound, BoundedSideInfoNeverFails) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> zd(-0.999, 0.999), xd(-10, 10), ud(-0.5, 0.5);
  for (int i = 0; i < 200000; ++i) {
    const double x = xd(rng);
    ASSERT_FALSE(nested_decode_failed(x, x + zd(rng), kFig, ud(rng)));
  }
}

TEST(FailureBound, EmpiricalRateBelowBound) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> zd(0.0, 0.5);
  std::uniform_real_distribution<double> xd(-10, 10), ud(-0.5, 0.5);
  int fails = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = xd(rng);
    fails += nested_decode_failed(x, x + zd(rng), kFig, ud(rng));
  }
  EXPECT_LE(fails / double(n), failure_prob_bound(kFig, {0.5}));
}

TEST(NestedMse, Examples) {
  EXPECT_NEAR(nested_mse(kFig, {0.7}), 1.0 / 12.0, 1e-12);
  EXPECT_NEAR(nested_mse(NestedConfig{1.0, 3, 0.70711}, {std::sqrt(1.0 / 6.0)}),
              0.08333, 1e-5);
  NestedConfig tiny{1e-300, 3, 1.0};
  EXPECT_NEAR(nested_mse(tiny, {1.0}), 0.0, 1e-300);
}

TEST(NestedVector, TernaryIndices) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::vector<double> v(1000);
  for (auto& x : v) x = nd(rng);
  GradientVector g(v);
  auto msg = nested_encode_vector(g, inf_norm(g.view()), {1.0 / 3.0, 3, 1.0}, {1, 1});
  for (auto s : msg.rel_indices) {
    ASSERT_GE(s, -1);
    ASSERT_LE(s, 1);
  }
}

TEST(NestedVector, ZeroInnovationRecoversGradient) {
  const double kappa = 2.0, d1 = 0.25;
  std::vector<double> v{0.5, -1.0, 1.5, 2.0, -0.5};  // kappa * multiples of d1
  GradientVector g(v);
  NestedConfig c{d1, 3, 1.0};
  // Zero dither is emulated through the scalar API, which the vector path wraps.
  for (double x : v) {
    EXPECT_EQ(kappa * nested_decode(nested_encode(x / kappa, c, 0.0), x / kappa, c, 0.0), x);
  }
  auto msg = nested_encode_vector(g, kappa, c, {7, 7});
  auto rec = nested_decode_vector(msg, g.view());
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_LE(std::abs(rec[i] - v[i]), kappa * d1 / 2 + 1e-12);
  }
}

TEST(NestedVector, BoundedNoiseErrorWithinHalfFineStep) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  const NestedConfig c{0.1, 5, 1.0};
  const double limit = (c.delta2() - c.delta1) / 2;
  std::vector<double> v(5000), y(5000);
  const double kappa = 3.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = nd(rng);
    double z;
    do { z = 0.05 * nd(rng); } while (std::abs(z) >= limit);
    y[i] = v[i] + kappa * z;
  }
  GradientVector g(v);
  auto msg = nested_encode_vector(g, kappa, c, {9, 2});
  auto rec = nested_decode_vector(msg, y);
  EXPECT_EQ(count_decode_failures(g, y, kappa, c, {9, 2}), 0u);
  for (std::size_t i = 0; i < v.size(); ++i) {
    ASSERT_LE(std::abs(rec[i] - v[i]), kappa * c.delta1 / 2 * (1 + 1e-9));
  }
}

TEST(NestedVector, Errors) {
  GradientVector g({1.0, 2.0});
  EXPECT_THROW(nested_encode_vector(g, 0.0, {0.1, 3, 1.0}, {1, 1}), InvalidArgument);
  EXPECT_THROW(nested_encode_vector(g, -1.0, {0.1, 3, 1.0}, {1, 1}), InvalidArgument);
  auto msg = nested_encode_vector(g, 2.0, {0.1, 3, 1.0}, {1, 1});
  std::vector<double> short_y{1.0};
  EXPECT_THROW(nested_decode_vector(msg, short_y), InvalidArgument);
}

}  // namespace
}  // namespace gradquant
