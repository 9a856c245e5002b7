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

// Experiment configuration and its key = value file format.
//
//   # comment
//   problem   = quadratic
//   quantizer = ndqsg
//   workers   = 8
//   groups    = 4:4
//
// Unknown keys and malformed values are rejected with ConfigError.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "gradquant/common.hpp"
#include "gradquant/dither.hpp"
#include "gradquant/idx.hpp"
#include "gradquant/optim.hpp"
#include "gradquant/problems.hpp"

namespace gradquant {

enum class Scheme { kNone, kDqsg, kQsgd, kTernGrad, kOneBit, kNdqsg };

inline Scheme parse_scheme(const std::string& s) {
  if (s == "none" || s == "baseline") return Scheme::kNone;
  if (s == "dqsg") return Scheme::kDqsg;
  if (s == "qsgd") return Scheme::kQsgd;
  if (s == "terngrad") return Scheme::kTernGrad;
  if (s == "onebit") return Scheme::kOneBit;
  if (s == "ndqsg") return Scheme::kNdqsg;
  throw ConfigError("unknown quantizer '" + s +
                    "' (expected none|dqsg|qsgd|terngrad|onebit|ndqsg)");
}

struct ExperimentConfig {
  std::string problem = "quadratic";  // quadratic|least_squares|logistic|mlp|mnist
  std::string quantizer = "dqsg";
  double delta = 0.5;                 // DQSG / QSGD step, must equal 1/M
  int nesting_k = 3;
  double nested_delta1 = 1.0 / 3.0;
  std::string alpha_mode = "one";     // one | auto | <value in (0,1]>
  std::size_t workers = 4;
  std::string groups;                 // "P1:P2" worker split for ndqsg
  std::size_t batch = 256;            // global batch, split across workers
  std::string optimizer = "sgd";      // sgd | adam
  double lr = 0.01;
  double decay = 0.98;                // per-epoch learning-rate factor
  std::string schedule = "constant";  // constant | inv_t
  std::size_t rounds = 100;
  std::uint64_t master_seed = 1;
  std::size_t partitions = 1;
  std::size_t dim = 10;               // quadratic / least_squares dimension
  double noise = 1.0;                 // quadratic oracle noise sigma
  std::size_t samples = 1024;         // synthetic dataset size / MNIST limit
  std::size_t epoch_rounds = 0;       // 0: derived from the dataset
  std::string mnist_dir;

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "problem",   "quantizer",     "delta",      "nesting_k",
        "nested_delta1", "alpha_mode", "workers",   "groups",
        "batch",     "optimizer",     "lr",         "decay",
        "schedule",  "rounds",        "master_seed", "partitions",
        "dim",       "noise",         "samples",    "epoch_rounds",
        "mnist_dir"};
    return k;
  }

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;

  Scheme scheme() const { return parse_scheme(quantizer); }
  int levels_m() const { return static_cast<int>(std::lround(1.0 / delta)); }
  // (|P1|, |P2|); all workers are in P1 unless the scheme is ndqsg.
  std::pair<std::size_t, std::size_t> group_sizes() const;

  std::vector<std::pair<std::string, std::string>> resolved() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : keys()) out.emplace_back(k, get(k));
    return out;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const char* ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  s.erase(s.find_last_not_of(ws) + 1);
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  std::from_chars_result res;
  if constexpr (std::is_floating_point_v<T>) {
    // fractions such as 1/3 are accepted for step sizes
    auto slash = value.find('/');
    if (slash != std::string::npos) {
      double num = parse_number<double>(key, value.substr(0, slash));
      double den = parse_number<double>(key, value.substr(slash + 1));
      if (den == 0.0) throw ConfigError("key '" + key + "': zero denominator");
      return static_cast<T>(num / den);
    }
    char* end = nullptr;
    out = static_cast<T>(std::strtod(value.c_str(), &end));
    res.ptr = end;
    res.ec = std::errc{};
  } else {
    res = std::from_chars(first, last, out);
  }
  if (value.empty() || res.ec != std::errc{} || res.ptr != last) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream oss;
  oss.precision(17);
  oss << v;
  return oss.str();
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& key,
                                  const std::string& raw) {
  const std::string value = detail::trim(raw);
  using detail::parse_number;
  if (key == "problem") problem = value;
  else if (key == "quantizer") quantizer = value;
  else if (key == "delta") delta = parse_number<double>(key, value);
  else if (key == "nesting_k") nesting_k = parse_number<int>(key, value);
  else if (key == "nested_delta1") nested_delta1 = parse_number<double>(key, value);
  else if (key == "alpha_mode") alpha_mode = value;
  else if (key == "workers") workers = parse_number<std::size_t>(key, value);
  else if (key == "groups") groups = value;
  else if (key == "batch") batch = parse_number<std::size_t>(key, value);
  else if (key == "optimizer") optimizer = value;
  else if (key == "lr") lr = parse_number<double>(key, value);
  else if (key == "decay") decay = parse_number<double>(key, value);
  else if (key == "schedule") schedule = value;
  else if (key == "rounds") rounds = parse_number<std::size_t>(key, value);
  else if (key == "master_seed") master_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "partitions") partitions = parse_number<std::size_t>(key, value);
  else if (key == "dim") dim = parse_number<std::size_t>(key, value);
  else if (key == "noise") noise = parse_number<double>(key, value);
  else if (key == "samples") samples = parse_number<std::size_t>(key, value);
  else if (key == "epoch_rounds") epoch_rounds = parse_number<std::size_t>(key, value);
  else if (key == "mnist_dir") mnist_dir = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

inline std::string ExperimentConfig::get(const std::string& key) const {
  using detail::format_double;
  if (key == "problem") return problem;
  if (key == "quantizer") return quantizer;
  if (key == "delta") return format_double(delta);
  if (key == "nesting_k") return std::to_string(nesting_k);
  if (key == "nested_delta1") return format_double(nested_delta1);
  if (key == "alpha_mode") return alpha_mode;
  if (key == "workers") return std::to_string(workers);
  if (key == "groups") {
    auto [p1, p2] = group_sizes();
    return std::to_string(p1) + ":" + std::to_string(p2);
  }
  if (key == "batch") return std::to_string(batch);
  if (key == "optimizer") return optimizer;
  if (key == "lr") return format_double(lr);
  if (key == "decay") return format_double(decay);
  if (key == "schedule") return schedule;
  if (key == "rounds") return std::to_string(rounds);
  if (key == "master_seed") return std::to_string(master_seed);
  if (key == "partitions") return std::to_string(partitions);
  if (key == "dim") return std::to_string(dim);
  if (key == "noise") return format_double(noise);
  if (key == "samples") return std::to_string(samples);
  if (key == "epoch_rounds") return std::to_string(epoch_rounds);
  if (key == "mnist_dir") return mnist_dir;
  throw ConfigError("unknown config key '" + key + "'");
}

inline std::pair<std::size_t, std::size_t> ExperimentConfig::group_sizes()
    const {
  if (quantizer != "ndqsg") return {workers, 0};
  if (groups.empty()) return {workers - workers / 2, workers / 2};
  auto colon = groups.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("groups must look like 'P1:P2', got '" + groups + "'");
  }
  auto p1 = detail::parse_number<std::size_t>("groups",
                                              detail::trim(groups.substr(0, colon)));
  auto p2 = detail::parse_number<std::size_t>("groups",
                                              detail::trim(groups.substr(colon + 1)));
  return {p1, p2};
}

inline void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  const std::vector<std::string> problems = {"quadratic", "least_squares",
                                             "logistic", "mlp", "mnist"};
  if (std::find(problems.begin(), problems.end(), problem) == problems.end()) {
    fail("unknown problem '" + problem + "'");
  }
  const Scheme s = scheme();
  if (workers == 0) fail("workers must be >= 1");
  if (batch < workers) fail("batch must be >= workers");
  if (rounds == 0) fail("rounds must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) fail("decay must lie in (0, 1]");
  if (optimizer != "sgd" && optimizer != "adam") {
    fail("optimizer must be sgd or adam");
  }
  if (schedule != "constant" && schedule != "inv_t") {
    fail("schedule must be constant or inv_t");
  }
  if (s == Scheme::kDqsg || s == Scheme::kQsgd || s == Scheme::kNdqsg) {
    if (!(delta > 0.0 && delta <= 1.0)) fail("delta must lie in (0, 1]");
    const int m = levels_m();
    if (std::abs(1.0 / m - delta) > 1e-9) {
      fail("delta must be 1/M for an integer M, got " +
           detail::format_double(delta));
    }
  }
  if (partitions == 0) fail("partitions must be >= 1");
  if (dim == 0) fail("dim must be >= 1");
  if (noise < 0.0) fail("noise must be nonnegative");
  if (samples == 0) fail("samples must be >= 1");
  if (problem == "mnist" && mnist_dir.empty()) {
    fail("problem mnist requires mnist_dir");
  }
  if (s == Scheme::kNdqsg) {
    auto [p1, p2] = group_sizes();
    if (p1 + p2 != workers) {
      fail("groups " + groups + " do not add up to " + std::to_string(workers) +
           " workers");
    }
    if (p1 == 0) fail("ndqsg needs at least one P1 (side information) worker");
    if (nesting_k < 2) fail("nesting_k must be >= 2");
    if (!(nested_delta1 > 0.0)) fail("nested_delta1 must be positive");
    if (alpha_mode != "one" && alpha_mode != "auto") {
      double a = detail::parse_number<double>("alpha_mode", alpha_mode);
      if (!(a > 0.0 && a <= 1.0)) fail("alpha_mode value must lie in (0, 1]");
    }
  }
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    cfg.set(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

// Builds the problem described by the config. Data and w* are drawn from
// seeds derived from master_seed.
inline std::shared_ptr<const Problem> make_problem(const ExperimentConfig& c) {
  const std::uint64_t data_seed = mix64(c.master_seed ^ 0xD1B54A32D192ED03ULL);
  if (c.problem == "quadratic") {
    return std::make_shared<GaussianQuadratic>(
        GaussianQuadratic::random(c.dim, 1.0, c.noise, data_seed));
  }
  if (c.problem == "least_squares") {
    return std::make_shared<LeastSquares>(std::max(c.samples, c.dim), c.dim,
                                          data_seed);
  }
  if (c.problem == "logistic") {
    return std::make_shared<Logistic>(c.samples, data_seed);
  }
  if (c.problem == "mlp") {
    return std::make_shared<Mlp>(std::vector<std::size_t>{2, 16, 2},
                                 two_moons(c.samples, 0.1, data_seed));
  }
  if (c.problem == "mnist") {
    return std::make_shared<Mlp>(fc300_100_layers(),
                                 load_mnist(c.mnist_dir, c.samples),
                                 "mnist_fc300_100");
  }
  throw ConfigError("unknown problem '" + c.problem + "'");
}

}  // namespace gradquant
