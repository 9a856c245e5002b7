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
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "gradquant/bits_table.hpp"
#include "gradquant/codec.hpp"
#include "gradquant/wire.hpp"

namespace gradquant {
namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes read_golden(const std::string& name) {
  std::ifstream in(std::string(GQ_GOLDEN_DIR) + "/" + name, std::ios::binary);
  EXPECT_TRUE(in.good()) << "missing golden file " << name;
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

QuantizedMessage worked_message() {
  const std::vector<double> g{0.6, -0.2}, u{0.1, -0.2};
  auto msg = dithered_encode(std::span<const double>(g), {0.5, 2}, u);
  msg.dither = {0x0102030405060708ULL, 9};
  return msg;
}

IndexStream skewed_stream(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> d({0.05, 0.9, 0.05});
  IndexStream s{{}, -1, 1};
  for (std::size_t i = 0; i < n; ++i) s.symbols.push_back(d(rng) - 1);
  return s;
}

TEST(BitsForLevels, Values) {
  EXPECT_EQ(bits_for_levels(1), 0u);
  EXPECT_EQ(bits_for_levels(2), 1u);
  EXPECT_EQ(bits_for_levels(3), 2u);
  EXPECT_EQ(bits_for_levels(5), 3u);
  EXPECT_EQ(bits_for_levels(8), 3u);
  EXPECT_EQ(bits_for_levels(9), 4u);
}

TEST(BitIo, RoundTripAndTruncation) {
  BitWriter w;
  w.put(5, 3);
  w.put(0x3FF, 10);
  w.put_bit(1);
  EXPECT_EQ(w.bit_count(), 14u);
  Bytes b = w.bytes();
  BitReader r(b);
  EXPECT_EQ(r.get(3), 5u);
  EXPECT_EQ(r.get(10), 0x3FFu);
  EXPECT_EQ(r.get_bit(), 1u);
  EXPECT_EQ(r.get(2), 0u);  // padding
  EXPECT_THROW(r.get_bit(), DecodeError);
  EXPECT_EQ(r.get_bit_or(1), 1u);
}

TEST(Wire, WorkedExampleLayout) {
  const Bytes expect{
      0x01,                                            // kind
      0x02, 0x00, 0x00, 0x00,                          // n
      0x01, 0x00, 0x00, 0x00,                          // K
      0x9A, 0x99, 0x19, 0x3F,                          // kappa as f32
      0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01,  // seed
      0x09, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,  // round
      0x0C,                                            // q+M = 4, 1 at 3 bits
  };
  EXPECT_EQ(serialize(worked_message()), expect);
  EXPECT_EQ(read_golden("dithered_example.bin"), expect);
}

TEST(Wire, QuantizedRoundTrip) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int m : {1, 2, 3, 7}) {
    for (std::size_t k : {1u, 3u}) {
      std::vector<double> v(101);
      for (auto& x : v) x = nd(rng);
      auto cfg = UniformQuantizerCfg::with_levels(m);
      auto msg = partition_encode(GradientVector(v), k, cfg, {5, 6});
      auto back = deserialize_quantized(serialize(msg), cfg);
      EXPECT_EQ(back.indices, msg.indices);
      EXPECT_EQ(back.partitions, msg.partitions);
      EXPECT_EQ(back.dither, msg.dither);
      EXPECT_EQ(dithered_decode(back, {5, 6}).values, dithered_decode(msg, {5, 6}).values);
    }
  }
}

TEST(Wire, StochasticRoundTrip) {
  auto msg = stochastic_encode(GradientVector({0.2, -0.9, 0.4}), 1, {1, 2});
  auto back = deserialize_quantized(serialize(msg), msg.cfg);
  EXPECT_EQ(back.kind, QuantizerKind::kStochastic);
  EXPECT_EQ(stochastic_decode(back).values, stochastic_decode(msg).values);
}

TEST(Wire, NestedRoundTrip) {
  NestedConfig cfg{1.0 / 3.0, 3, 1.0};
  std::vector<double> v{0.3, -0.8, 0.55, 0.0, 1.0};
  auto msg = nested_encode_vector(GradientVector(v), 1.0, cfg, {4, 4});
  auto bytes = serialize(msg);
  EXPECT_EQ(bytes.size(), 1u + 4 + 4 + 4 + 8 + 8 + 2);  // 5 x 2 bits
  auto back = deserialize_nested(bytes, cfg);
  EXPECT_EQ(back.rel_indices, msg.rel_indices);
  EXPECT_EQ(back.kappa, msg.kappa);
  EXPECT_EQ(back.dither, msg.dither);
}

TEST(Wire, MalformedInputs) {
  const UniformQuantizerCfg cfg{0.5, 2};
  Bytes good = serialize(worked_message());
  EXPECT_THROW(deserialize_quantized(Bytes(good.begin(), good.begin() + 10), cfg),
               DecodeError);
  EXPECT_THROW(deserialize_quantized(Bytes(good.begin(), good.end() - 1), cfg),
               DecodeError);
  Bytes bad_kind = good;
  bad_kind[0] = 9;
  EXPECT_THROW(deserialize_quantized(bad_kind, cfg), DecodeError);
  Bytes zero_n = good;
  zero_n[1] = 0;
  EXPECT_THROW(deserialize_quantized(zero_n, cfg), DecodeError);
  Bytes big_index = good;
  big_index.back() = 0x07;  // raw 7 > 2M
  EXPECT_THROW(deserialize_quantized(big_index, cfg), DecodeError);
  EXPECT_THROW(deserialize_nested(good, {0.1, 3, 1.0}), DecodeError);
  EXPECT_THROW(deserialize_quantized(Bytes{}, cfg), DecodeError);
}

TEST(RawBits, TableValues) {
  const std::size_t n = dense_parameter_count({784, 300, 100, 10});
  EXPECT_EQ(n, 266610u);
  EXPECT_NEAR(raw_bits(n, std::uint64_t{1} << 32, 0) / 1000, 8531.52, 1e-9);
  const double three = raw_bits(n, 3, 1) / 1000;
  EXPECT_NEAR(three, 422.6, 0.05);
  EXPECT_LT(std::abs(three - 422.8) / 422.8, 0.005);
  const double five = raw_bits(n, 5, 1) / 1000;
  EXPECT_NEAR(five, 619.1, 0.05);
  EXPECT_LT(std::abs(five - 619.2) / 619.2, 0.005);
  EXPECT_EQ(packed_bits(10, 5, 2), 10u * 3 + 64);
  EXPECT_THROW(raw_bits(10, 1, 1), InvalidArgument);
}

TEST(BitsTable, Rows) {
  auto rows = bits_table({784, 300, 100, 10});
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0].scheme, "baseline_fp32");
  EXPECT_NEAR(rows[0].raw_bits / 1000, 8531.5, 0.05);
  EXPECT_TRUE(rows[1].reported_only);
  EXPECT_EQ(rows[2].scales, 6u);
  EXPECT_NEAR(rows[2].raw_bits / 1000, 422.8, 0.05);
  EXPECT_THROW(dense_parameter_count({10}), InvalidArgument);
  EXPECT_THROW(dense_parameter_count({10, 0}), InvalidArgument);
}

TEST(Entropy, Examples) {
  const std::vector<std::int32_t> same(50, 2);
  EXPECT_EQ(empirical_entropy(same), 0.0);
  std::vector<std::int32_t> uni;
  for (int i = 0; i < 30; ++i) uni.push_back(i % 3);
  EXPECT_NEAR(empirical_entropy(uni), 30 * std::log2(3.0), 1e-9);
  const std::vector<std::int32_t> skew{0, 0, 1, 2};
  EXPECT_NEAR(empirical_entropy(skew), 6.0, 1e-12);
  EXPECT_THROW(empirical_entropy(std::vector<std::int32_t>{}), InvalidArgument);
}

TEST(Aac, NearEntropyOnSkewedSource) {
  auto s = skewed_stream(100000, 11);
  const double h = -(0.9 * std::log2(0.9) + 2 * 0.05 * std::log2(0.05));
  EXPECT_NEAR(h, 0.569, 1e-3);
  const double coded = aac_encode(s).size() * 8.0;
  EXPECT_LT(std::abs(coded - 100000 * h) / (100000 * h), 0.05);
  EXPECT_EQ(aac_decode(aac_encode(s), s.symbols.size(), -1, 1).symbols, s.symbols);
}

TEST(Aac, RepeatedSymbolIsCheap) {
  IndexStream s{std::vector<std::int32_t>(10000, 0), -1, 1};
  EXPECT_LT(aac_encode(s).size() * 8, 200u);
}

TEST(Aac, LosslessFuzz) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const int alphabet = 1 + static_cast<int>(rng() % 40);
    const std::size_t n = rng() % 3000;
    const std::int32_t lo = static_cast<std::int32_t>(rng() % 11) - 5;
    IndexStream s{{}, lo, lo + alphabet - 1};
    const bool bursty = trial % 2;
    for (std::size_t i = 0; i < n; ++i) {
      std::int32_t v = bursty && i > 0 && rng() % 4 ? s.symbols.back()
                                                    : lo + static_cast<std::int32_t>(rng() % alphabet);
      s.symbols.push_back(v);
    }
    auto frame = aac_encode_frame(s);
    ASSERT_EQ(aac_decode_frame(frame, lo).symbols, s.symbols) << "trial " << trial;
  }
}

TEST(Aac, Errors) {
  IndexStream bad{{0, 5}, -1, 1};
  EXPECT_THROW(aac_encode(bad), InvalidArgument);
  auto s = skewed_stream(2000, 13);
  auto payload = aac_encode(s);
  Bytes cut(payload.begin(), payload.end() - 1);
  EXPECT_THROW(aac_decode(cut, s.symbols.size(), -1, 1), DecodeError);
  EXPECT_THROW(aac_decode_frame(Bytes{1, 0}, 0), DecodeError);
  Bytes empty_alpha{1, 0, 0, 0, 0};
  EXPECT_THROW(aac_decode_frame(empty_alpha, 0), DecodeError);
  IndexStream wide{{0}, 0, 300};
  EXPECT_THROW(aac_encode_frame(wide), InvalidArgument);
}

TEST(Aac, GoldenFrame) {
  IndexStream s{{0, 1, 1, -1, 0, 0, 0, 1, 0, 0, -1, 0}, -1, 1};
  auto frame = aac_encode_frame(s);
  EXPECT_EQ(frame, read_golden("aac_frame.bin"));
  EXPECT_EQ(aac_decode_frame(read_golden("aac_frame.bin"), -1).symbols, s.symbols);
}

TEST(MeasureBits, WideAlphabetChargedAtPackedSize) {
  IndexStream s{{-1000, 0, 7, 1000}, -1000, 1000};
  auto r = measure_bits(s, 2001, 1);
  EXPECT_EQ(r.coded_bits, r.packed_bits);
  EXPECT_EQ(r.packed_bits, 4u * 11 + 32);
}

TEST(MeasureBits, Consistent) {
  auto s = skewed_stream(5000, 14);
  auto r = measure_bits(s, 3, 1);
  EXPECT_EQ(r.scale_bits, 32u);
  EXPECT_NEAR(r.raw_bits, 5000 * std::log2(3.0) + 32, 1e-9);
  EXPECT_EQ(r.packed_bits, 5000u * 2 + 32);
  EXPECT_NEAR(r.entropy_bits, empirical_entropy(s) + 32, 1e-9);
  EXPECT_GE(static_cast<double>(r.coded_bits), r.entropy_bits - 1);
  BitReport sum;
  sum += r;
  sum += r;
  EXPECT_EQ(sum.coded_bits, 2 * r.coded_bits);
}

}  // namespace
}  // namespace gradquant
