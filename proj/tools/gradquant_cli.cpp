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

// gradquant command-line front end.
//
//   gradquant train  [--config FILE] [--seed S] [--out DIR] [--KEY V] [KEY=V ...]
//   gradquant bits   [--layers 784,300,100,10] [--json]
//   gradquant verify [--out DIR] [--seed S]
//   gradquant stats-test [--seed S]
//   gradquant quantize-bench [--n N] [--levels M] [--repeats R]
//
// Exit codes: 0 success, 1 failed verification, 2 configuration error,
// 3 I/O error, 4 training aborted, 5 protocol error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradquant/bits_table.hpp"
#include "gradquant/config.hpp"
#include "gradquant/simnet.hpp"
#include "gradquant/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gradquant;

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitAborted = 4;
constexpr int kExitProtocol = 5;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json config_json(const ExperimentConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.resolved()) j[k] = v;
  return j;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw IoError("write to " + path.string() + " failed");
}

json checks_json(const std::vector<CheckResult>& results) {
  json arr = json::array();
  for (const auto& r : results) {
    arr.push_back({{"name", r.name},
                   {"description", r.description},
                   {"statistic", r.statistic},
                   {"relation", r.relation},
                   {"threshold", r.threshold},
                   {"verdict", r.pass ? "pass" : "fail"},
                   {"seconds", r.seconds}});
  }
  return arr;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool timing = false;
  std::map<std::string, std::string> key_options;
  std::vector<std::string> overrides;
};

ExperimentConfig build_config(const TrainArgs& a) {
  ExperimentConfig cfg;
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw IoError("cannot open config file " + a.config_path);
    cfg = parse_config(in);
  }
  for (const auto& [k, v] : a.key_options) {
    if (!v.empty()) cfg.set(k, v);
  }
  for (const auto& kv : a.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + kv + "' is not of the form key=value");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.seed) cfg.master_seed = *a.seed;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a) {
  const ExperimentConfig cfg = build_config(a);
  Simulation sim(cfg, a.timing);
  const auto reports = sim.run();

  std::ostringstream csv;
  write_csv(csv, cfg, reports);

  double raw = 0.0, entropy = 0.0;
  std::uint64_t coded = 0, failures = 0;
  for (const auto& r : reports) {
    raw += r.bits.raw_bits;
    entropy += r.bits.entropy_bits;
    coded += r.bits.coded_bits;
    failures += r.decode_failures;
  }
  const auto w_star = sim.problem().optimum();
  json summary = {{"version", kVersion},
                  {"config", config_json(cfg)},
                  {"rounds", reports.size()},
                  {"final_loss", reports.back().loss},
                  {"optimum_loss", w_star ? json(sim.problem().loss(*w_star))
                                          : json(nullptr)},
                  {"raw_bits_total", raw},
                  {"coded_bits_total", coded},
                  {"entropy_bits_total", entropy},
                  {"decode_failures_total", failures}};

  if (a.out_dir.empty()) {
    std::cout << csv.str();
    std::cerr << summary.dump(2) << "\n";
  } else {
    write_file(fs::path(a.out_dir) / "rounds.csv", csv.str());
    write_file(fs::path(a.out_dir) / "summary.json", summary.dump(2) + "\n");
    std::cout << "wrote " << (fs::path(a.out_dir) / "rounds.csv").string()
              << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> parse_layers(const std::string& spec) {
  std::vector<std::size_t> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(detail::parse_number<std::size_t>("layers", detail::trim(tok)));
  }
  if (out.size() < 2) throw ConfigError("--layers needs at least two widths");
  return out;
}

int cmd_bits(const std::string& layers_spec, bool as_json) {
  const auto layers = parse_layers(layers_spec);
  const auto rows = bits_table(layers);
  const std::size_t n = dense_parameter_count(layers);
  if (as_json) {
    json j = {{"version", kVersion}, {"layers", layers}, {"parameters", n}};
    for (const auto& r : rows) {
      j["rows"].push_back({{"scheme", r.scheme},
                           {"levels", r.levels},
                           {"scales", r.scales},
                           {"raw_bits", r.raw_bits},
                           {"kbits", r.raw_bits / 1000.0},
                           {"reported_only", r.reported_only}});
    }
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("# gradquant %s\n# layers=%s parameters=%zu\n", kVersion,
              layers_spec.c_str(), n);
  std::printf("%-14s %12s %7s %12s\n", "scheme", "levels", "scales", "Kbit");
  for (const auto& r : rows) {
    std::printf("%-14s %12llu %7zu %12.1f%s\n", r.scheme.c_str(),
                static_cast<unsigned long long>(r.levels), r.scales,
                r.raw_bits / 1000.0, r.reported_only ? "  (reported only)" : "");
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_verify(const std::string& out_dir, std::uint64_t seed,
               bool corrupt_dither) {
  VerifyOptions opt;
  opt.seed = seed;
  if (corrupt_dither) opt.dither.index_mul = 0;
  const auto results = VerificationSuite(opt).run();
  json report = {{"version", kVersion},
                 {"seed", seed},
                 {"corrupt_dither", corrupt_dither},
                 {"checks", checks_json(results)},
                 {"passed", all_passed(results)}};
  const fs::path path = fs::path(out_dir.empty() ? "." : out_dir) /
                        "verify_report.json";
  write_file(path, report.dump(2) + "\n");
  int failed = 0;
  for (const auto& r : results) {
    std::printf("%s %-40s %.6g %s %.6g\n", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.statistic, r.relation.c_str(), r.threshold);
    if (!r.pass) ++failed;
  }
  std::printf("%zu checks, %d failed; report: %s\n", results.size(), failed,
              path.string().c_str());
  if (failed) {
    for (const auto& r : results) {
      if (!r.pass) std::fprintf(stderr, "failed check: %s\n", r.name.c_str());
    }
    return kExitVerifyFailed;
  }
  return 0;
}

int cmd_stats_test(std::uint64_t seed) {
  VerifyOptions opt;
  opt.seed = seed;
  const auto results = VerificationSuite(opt).run();
  json report = {{"version", kVersion},
                 {"seed", seed},
                 {"checks", checks_json(results)},
                 {"passed", all_passed(results)}};
  std::cout << report.dump(2) << "\n";
  return all_passed(results) ? 0 : kExitVerifyFailed;
}

int cmd_quantize_bench(std::size_t n, int levels, std::size_t repeats,
                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> g(n);
  for (auto& x : g) x = normal(rng);
  const GradientVector grad(std::move(g));
  const auto cfg = UniformQuantizerCfg::with_levels(levels);
  using clock = std::chrono::steady_clock;
  double enc_s = 0.0, dec_s = 0.0, ser_s = 0.0, err = 0.0;
  std::size_t bytes = 0;
  for (std::size_t r = 0; r < repeats; ++r) {
    const DitherCoordinates c{seed, r};
    auto t0 = clock::now();
    auto msg = dithered_encode(grad, cfg, c);
    auto t1 = clock::now();
    auto wire_bytes = serialize(msg);
    auto back = deserialize_quantized(wire_bytes, cfg);
    auto t2 = clock::now();
    auto rec = dithered_decode(back, cfg, c);
    auto t3 = clock::now();
    enc_s += std::chrono::duration<double>(t1 - t0).count();
    ser_s += std::chrono::duration<double>(t2 - t1).count();
    dec_s += std::chrono::duration<double>(t3 - t2).count();
    bytes = wire_bytes.size();
    err = std::max(err, std::sqrt(squared_distance(rec.view(), grad.view())));
  }
  const double elems = static_cast<double>(n * repeats);
  json j = {{"version", kVersion},
            {"n", n},
            {"levels_m", levels},
            {"repeats", repeats},
            {"message_bytes", bytes},
            {"encode_melem_per_s", elems / enc_s / 1e6},
            {"wire_melem_per_s", elems / ser_s / 1e6},
            {"decode_melem_per_s", elems / dec_s / 1e6},
            {"max_l2_error", err}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dithered and nested gradient quantization simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "run a distributed SGD experiment");
  t->add_option("--config", train.config_path, "key = value config file");
  t->add_option("--seed", train.seed, "master seed (overrides master_seed)");
  t->add_option("--out", train.out_dir,
                "output directory for rounds.csv and summary.json");
  t->add_flag("--timing", train.timing, "record wall_ms (breaks byte equality)");
  for (const auto& k : ExperimentConfig::keys()) {
    t->add_option("--" + k, train.key_options[k], "config key " + k);
  }
  t->add_option("overrides", train.overrides, "key=value overrides");

  std::string layers = "784,300,100,10";
  bool bits_json = false;
  auto* b = app.add_subcommand("bits", "raw bits per worker per iteration");
  b->add_option("--layers", layers, "dense layer widths")->capture_default_str();
  b->add_flag("--json", bits_json, "emit JSON instead of a table");

  std::string verify_out;
  std::uint64_t verify_seed = VerifyOptions{}.seed;
  bool corrupt = false;
  auto* v = app.add_subcommand("verify", "run the statistical check suite");
  v->add_option("--out", verify_out, "directory for verify_report.json");
  v->add_option("--seed", verify_seed, "suite seed")->capture_default_str();
  v->add_flag("--corrupt-dither", corrupt,
              "negative control: break dither index addressing");

  std::uint64_t stats_seed = VerifyOptions{}.seed;
  auto* s = app.add_subcommand("stats-test", "JSON report of every check");
  s->add_option("--seed", stats_seed, "suite seed")->capture_default_str();

  std::size_t bench_n = 266'610, bench_repeats = 20;
  int bench_levels = 1;
  std::uint64_t bench_seed = 1;
  auto* q = app.add_subcommand("quantize-bench", "encode/decode throughput");
  q->add_option("--n", bench_n, "gradient length")->capture_default_str();
  q->add_option("--levels", bench_levels, "M")->capture_default_str();
  q->add_option("--repeats", bench_repeats, "rounds")->capture_default_str();
  q->add_option("--seed", bench_seed, "seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*t) return cmd_train(train);
    if (*b) return cmd_bits(layers, bits_json);
    if (*v) return cmd_verify(verify_out, verify_seed, corrupt);
    if (*s) return cmd_stats_test(stats_seed);
    if (*q) return cmd_quantize_bench(bench_n, bench_levels, bench_repeats,
                                      bench_seed);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  } catch (const TrainingAborted& e) {
    std::fprintf(stderr, "training aborted: %s\n", e.what());
    return kExitAborted;
  } catch (const ProtocolError& e) {
    std::fprintf(stderr, "protocol error: %s\n", e.what());
    return kExitProtocol;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
  return 0;
}
