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

// Synchronous parameter-server simulation.
//
// Each round every worker computes a stochastic gradient on its replica of
// the parameters, quantizes it and hands the server a serialized message.
// The server reproduces each worker's dither from the mirrored (seed, round)
// coordinates, decodes, averages and broadcasts the average; every worker
// then applies the same optimizer step, so the replicas never diverge.
//
// In the nested scheme the workers are split into two groups. Group P1 uses
// dithered quantization and its average seeds the side information. Group
// P2 sends nested indices, which the server decodes one worker at a time in
// ascending id against the running average, folding each decoded gradient
// into that average before the next decode.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gradquant/codec.hpp"
#include "gradquant/common.hpp"
#include "gradquant/config.hpp"
#include "gradquant/dither.hpp"
#include "gradquant/nested.hpp"
#include "gradquant/optim.hpp"
#include "gradquant/problems.hpp"
#include "gradquant/quantizer.hpp"
#include "gradquant/wire.hpp"

namespace gradquant {

// Worker parallelism cap from GRADQUANT_THREADS (default: hardware threads).
inline std::size_t thread_cap() {
  if (const char* env = std::getenv("GRADQUANT_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

template <typename F>
void parallel_for(std::size_t count, F&& fn) {
  const std::size_t threads = std::min(count, thread_cap());
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

enum class Group { kP1, kP2 };

struct WorkerNode {
  std::size_t id = 0;
  DitherCoordinates coords;
  Group group = Group::kP1;
  OptState opt;
  OneBitState onebit;
  double alpha = 1.0;  // shrinkage received with the last broadcast

  std::vector<double> last_gradient;
  std::vector<double> last_local_reconstruction;  // empty for P2
};

struct ServerNode {
  std::vector<DitherCoordinates> mirrors;
  std::vector<double> alpha;
  std::vector<double> z_sq_sum;
  std::vector<std::uint64_t> z_count;
  std::vector<double> average;
  std::vector<std::vector<double>> reconstructions;
};

struct RoundReport {
  std::uint64_t round = 0;
  double wall_ms = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;  // ||grad L|| at the parameters used this round
  BitReport bits;          // summed over workers
  std::vector<BitReport> worker_bits;
  double excess_var = 0.0;      // mean over workers of ||g~_p - g_p||^2
  double error_mean = 0.0;      // mean of (g~ - g) over all entries
  double error_var = 0.0;
  double average_error_sq = 0.0;  // ||avg g~ - grad L||^2
  std::uint64_t decode_failures = 0;
  double failure_bound = 0.0;   // expected-failure bound summed over P2
};

// Scheme-level constants shared by every round.
struct RoundContext {
  const Problem* problem = nullptr;
  Scheme scheme = Scheme::kDqsg;
  UniformQuantizerCfg uniform;
  NestedConfig nested;
  std::string alpha_mode = "one";
  std::size_t partitions = 1;
  std::size_t batch = 256;
  std::uint64_t master_seed = 1;
  std::size_t epoch_rounds = 100;
  bool timing = false;
};

namespace detail {

inline std::vector<std::size_t> split_sizes(std::size_t total,
                                            std::size_t parts) {
  std::vector<std::size_t> out(parts, total / parts);
  for (std::size_t j = 0; j < total % parts; ++j) ++out[j];
  return out;
}

// Global batch for `round`, split contiguously across workers. Dataset
// problems walk a per-epoch shuffled permutation.
inline std::vector<std::vector<std::size_t>> sample_batches(
    const RoundContext& ctx, std::uint64_t round, std::size_t workers) {
  std::vector<std::vector<std::size_t>> out(workers);
  const std::size_t m = ctx.problem->dataset_size();
  if (m == 0) return out;
  const std::size_t per_epoch = (m + ctx.batch - 1) / ctx.batch;
  const std::uint64_t epoch = round / per_epoch;
  const std::size_t slot = round % per_epoch;
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(mix64(ctx.master_seed ^ mix64(epoch + 0x5851F42D4C957F2DULL)));
  std::shuffle(perm.begin(), perm.end(), rng);
  auto sizes = split_sizes(ctx.batch, workers);
  std::size_t pos = slot * ctx.batch;
  for (std::size_t p = 0; p < workers; ++p) {
    for (std::size_t j = 0; j < sizes[p]; ++j, ++pos) {
      out[p].push_back(perm[pos % m]);
    }
  }
  return out;
}

inline std::uint64_t noise_seed(std::uint64_t master, std::uint64_t round,
                                std::size_t worker) {
  return mix64(mix64(master ^ 0xA0761D6478BD642FULL) + kGoldenGamma * round +
               kIndexStride * worker);
}

// What a worker hands to the transport.
struct Upload {
  std::vector<std::uint8_t> bytes;  // dithered / stochastic / nested
  OneBitMessage onebit;
  std::vector<double> dense;        // uncompressed baseline
  BitReport bits;
};

inline BitReport count_bits(std::span<const std::int32_t> symbols,
                            std::int32_t lo, std::int32_t hi,
                            std::uint64_t levels, std::size_t scales) {
  IndexStream s{{symbols.begin(), symbols.end()}, lo, hi};
  return measure_bits(s, levels, scales);
}

inline BitReport dense_bits(std::size_t n) {
  BitReport r;
  r.raw_bits = raw_bits(n, std::uint64_t{1} << 32, 0);
  r.packed_bits = 32ull * n;
  r.entropy_bits = r.raw_bits;
  r.coded_bits = r.packed_bits;
  return r;
}

inline void check_lockstep(const std::vector<WorkerNode>& workers,
                           const ServerNode& server) {
  if (workers.empty()) throw ConfigError("no workers");
  if (server.mirrors.size() != workers.size()) {
    throw ProtocolError("server mirrors a different number of workers");
  }
  const std::uint64_t round = workers.front().coords.round;
  for (const auto& w : workers) {
    const auto& mirror = server.mirrors[w.id];
    if (w.coords.round != round || mirror.round != round) {
      throw ProtocolError(detail::concat(
          "round counter mismatch: worker ", w.id, " at ", w.coords.round,
          ", server mirror at ", mirror.round, ", expected ", round));
    }
    if (w.coords.seed != mirror.seed) {
      throw ProtocolError(detail::concat("seed mismatch for worker ", w.id));
    }
  }
}

// Encodes one P1-style upload and the worker-local reconstruction.
inline Upload encode_p1(const RoundContext& ctx, WorkerNode& w,
                        const GradientVector& g) {
  Upload up;
  const std::size_t n = g.size();
  switch (ctx.scheme) {
    case Scheme::kDqsg:
    case Scheme::kNdqsg: {
      auto msg = partition_encode(g, ctx.partitions, ctx.uniform, w.coords);
      up.bytes = serialize(msg);
      w.last_local_reconstruction = dithered_decode(msg, w.coords).values;
      const std::int32_t m = ctx.uniform.levels_m;
      up.bits = count_bits(msg.indices, -m, m,
                           static_cast<std::uint64_t>(2 * m + 1),
                           msg.partitions.size());
      break;
    }
    case Scheme::kQsgd:
    case Scheme::kTernGrad: {
      const int m = ctx.scheme == Scheme::kTernGrad ? 1 : ctx.uniform.levels_m;
      auto msg = stochastic_encode(g, m, w.coords);
      up.bytes = serialize(msg);
      w.last_local_reconstruction = stochastic_decode(msg).values;
      up.bits = count_bits(msg.indices, -m, m,
                           static_cast<std::uint64_t>(2 * m + 1), 1);
      break;
    }
    case Scheme::kOneBit: {
      up.onebit = onebit_encode(g, w.onebit);
      w.last_local_reconstruction = up.onebit.reconstruct().values;
      std::vector<std::int32_t> sym(up.onebit.bits.begin(),
                                    up.onebit.bits.end());
      up.bits = count_bits(sym, 0, 1, 2, 2);
      break;
    }
    case Scheme::kNone: {
      up.dense = g.values;
      w.last_local_reconstruction = g.values;
      up.bits = dense_bits(n);
      break;
    }
  }
  return up;
}

inline std::vector<double> decode_p1(const RoundContext& ctx,
                                     const Upload& up,
                                     const DitherCoordinates& mirror) {
  switch (ctx.scheme) {
    case Scheme::kDqsg:
    case Scheme::kNdqsg: {
      auto msg = deserialize_quantized(up.bytes, ctx.uniform);
      return dithered_decode(msg, ctx.uniform, mirror).values;
    }
    case Scheme::kQsgd:
    case Scheme::kTernGrad: {
      const int m = ctx.scheme == Scheme::kTernGrad ? 1 : ctx.uniform.levels_m;
      auto msg = deserialize_quantized(up.bytes,
                                       UniformQuantizerCfg::with_levels(m));
      if (!(msg.dither == mirror)) {
        throw ProtocolError("stochastic message from a desynchronised worker");
      }
      return stochastic_decode(msg).values;
    }
    case Scheme::kOneBit:
      return up.onebit.reconstruct().values;
    case Scheme::kNone:
      return up.dense;
  }
  return {};
}

inline NestedConfig p2_config(const RoundContext& ctx, double alpha) {
  NestedConfig c = ctx.nested;
  c.alpha = alpha;
  return c;
}

struct RoundScratch {
  std::vector<GradientVector> gradients;
  std::vector<Upload> uploads;
  std::chrono::steady_clock::time_point start;
  std::vector<double> exact;
};

inline RoundScratch compute_uploads(const RoundContext& ctx,
                                    std::vector<WorkerNode>& workers) {
  RoundScratch rs;
  rs.start = std::chrono::steady_clock::now();
  const std::size_t P = workers.size();
  const std::uint64_t round = workers.front().coords.round;
  auto batches = sample_batches(ctx, round, P);
  auto sizes = split_sizes(ctx.batch, P);
  rs.gradients.resize(P);
  rs.uploads.resize(P);
  rs.exact = ctx.problem->exact_grad(workers.front().opt.w).values;
  parallel_for(P, [&](std::size_t p) {
    WorkerNode& w = workers[p];
    std::vector<double> g(ctx.problem->dim());
    ctx.problem->stochastic_gradient(
        w.opt.w, MiniBatch{noise_seed(ctx.master_seed, round, p), batches[p],
                           sizes[p]},
        g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw TrainingAborted(detail::concat(
            "worker ", p, " produced a non-finite gradient entry ", g[i],
            " at index ", i, ", round ", round));
      }
    }
    rs.gradients[p] = GradientVector(std::move(g));
    w.last_gradient = rs.gradients[p].values;
    if (w.group == Group::kP1) {
      rs.uploads[p] = encode_p1(ctx, w, rs.gradients[p]);
    } else {
      const auto& gp = rs.gradients[p];
      const double kappa = wire_scale(inf_norm(gp.view()));
      w.last_local_reconstruction.clear();
      Upload up;
      NestedMessage msg;
      msg.cfg = p2_config(ctx, w.alpha);
      msg.dither = w.coords;
      msg.kappa = kappa;
      if (kappa > 0.0) {
        msg = nested_encode_vector(gp, kappa, msg.cfg, w.coords);
      } else {
        msg.rel_indices.assign(gp.size(), 0);
      }
      up.bytes = serialize(msg);
      up.bits = count_bits(msg.rel_indices, msg.cfg.min_index(),
                           msg.cfg.max_index(),
                           static_cast<std::uint64_t>(msg.cfg.nesting_k), 1);
      rs.uploads[p] = std::move(up);
    }
  });
  return rs;
}

inline RoundReport finish_round(const RoundContext& ctx,
                                std::vector<WorkerNode>& workers,
                                ServerNode& server, RoundScratch& rs) {
  RoundReport rep;
  const std::size_t P = workers.size();
  const std::size_t n = ctx.problem->dim();
  rep.round = workers.front().coords.round;
  rep.grad_norm = std::sqrt(squared_norm(rs.exact));
  rep.average_error_sq = squared_distance(server.average, rs.exact);

  double err_sum = 0.0, err_sq = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    rep.bits += rs.uploads[p].bits;
    rep.worker_bits.push_back(rs.uploads[p].bits);
    const auto& rec = server.reconstructions[p];
    double e2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = rec[i] - rs.gradients[p][i];
      err_sum += e;
      e2 += e * e;
    }
    err_sq += e2;
    rep.excess_var += e2;
  }
  const double total = static_cast<double>(P * n);
  rep.excess_var /= static_cast<double>(P);
  rep.error_mean = err_sum / total;
  rep.error_var = err_sq / total - rep.error_mean * rep.error_mean;

  // Broadcast, step, advance.
  for (auto& w : workers) {
    w.alpha = server.alpha[w.id];
    optimizer_step(w.opt, server.average);
    if (ctx.epoch_rounds > 0 && (rep.round + 1) % ctx.epoch_rounds == 0) {
      w.opt.end_epoch();
    }
    w.coords = advance_round(w.coords);
  }
  for (auto& m : server.mirrors) m = advance_round(m);

  rep.loss = ctx.problem->loss(workers.front().opt.w);
  if (ctx.timing) {
    rep.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - rs.start)
                      .count();
  }
  return rep;
}

}  // namespace detail

// One round of dithered (or baseline) distributed SGD over all workers.
inline RoundReport run_dqsgd_round(std::vector<WorkerNode>& workers,
                                   ServerNode& server,
                                   const RoundContext& ctx) {
  detail::check_lockstep(workers, server);
  for (const auto& w : workers) {
    if (w.group != Group::kP1) {
      throw ConfigError("run_dqsgd_round called with a P2 worker");
    }
  }
  auto rs = detail::compute_uploads(ctx, workers);
  const std::size_t P = workers.size();
  const std::size_t n = ctx.problem->dim();
  server.reconstructions.assign(P, {});
  parallel_for(P, [&](std::size_t p) {
    server.reconstructions[p] =
        detail::decode_p1(ctx, rs.uploads[p], server.mirrors[p]);
  });
  server.average.assign(n, 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t i = 0; i < n; ++i) {
      server.average[i] += server.reconstructions[p][i];
    }
  }
  for (auto& v : server.average) v /= static_cast<double>(P);
  return detail::finish_round(ctx, workers, server, rs);
}

// One round of the two-group nested scheme.
inline RoundReport run_ndqsg_round(std::vector<WorkerNode>& workers,
                                   ServerNode& server,
                                   const RoundContext& ctx) {
  detail::check_lockstep(workers, server);
  std::vector<std::size_t> p1, p2;
  for (const auto& w : workers) {
    (w.group == Group::kP1 ? p1 : p2).push_back(w.id);
  }
  if (p1.empty()) {
    throw ConfigError("nested round needs at least one P1 worker");
  }
  auto rs = detail::compute_uploads(ctx, workers);
  const std::size_t P = workers.size();
  const std::size_t n = ctx.problem->dim();
  server.reconstructions.assign(P, {});
  parallel_for(p1.size(), [&](std::size_t j) {
    const std::size_t p = p1[j];
    server.reconstructions[p] =
        detail::decode_p1(ctx, rs.uploads[p], server.mirrors[p]);
  });
  server.average.assign(n, 0.0);
  for (std::size_t p : p1) {
    for (std::size_t i = 0; i < n; ++i) {
      server.average[i] += server.reconstructions[p][i];
    }
  }
  for (auto& v : server.average) v /= static_cast<double>(p1.size());

  std::uint64_t failures = 0;
  double failure_bound = 0.0;
  std::size_t absorbed = p1.size();
  std::sort(p2.begin(), p2.end());
  for (std::size_t p : p2) {
    const NestedConfig cfg = detail::p2_config(ctx, server.alpha[p]);
    auto msg = deserialize_nested(rs.uploads[p].bytes, cfg);
    if (!(msg.dither == server.mirrors[p])) {
      throw ProtocolError(detail::concat("nested message from worker ", p,
                                         " carries stale coordinates"));
    }
    std::vector<double> decoded;
    if (msg.kappa > 0.0) {
      decoded = nested_decode_vector(msg, server.average).values;
      // Simulator-side measurement: true z and failures need g_p.
      const auto& g = rs.gradients[p];
      failures += count_decode_failures(g, server.average, msg.kappa, cfg,
                                        msg.dither);
      double z2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double z = (g[i] - server.average[i]) / msg.kappa;
        z2 += z * z;
      }
      const double sigma_z = std::sqrt(z2 / static_cast<double>(n));
      failure_bound += static_cast<double>(n) *
                       failure_prob_bound(cfg, SideInfoModel{sigma_z});
      // Server-side sigma_z estimate from what it can observe.
      for (std::size_t i = 0; i < n; ++i) {
        const double z = (decoded[i] - server.average[i]) / msg.kappa;
        server.z_sq_sum[p] += z * z;
      }
      server.z_count[p] += n;
    } else {
      decoded.assign(n, 0.0);
    }
    server.reconstructions[p] = decoded;
    const double m = static_cast<double>(absorbed);
    for (std::size_t i = 0; i < n; ++i) {
      server.average[i] = (m * server.average[i] + decoded[i]) / (m + 1.0);
    }
    ++absorbed;

    if (ctx.alpha_mode == "auto" && server.z_count[p] > 0) {
      const double sz = std::sqrt(server.z_sq_sum[p] /
                                  static_cast<double>(server.z_count[p]));
      const double d1 = ctx.nested.delta1;
      server.alpha[p] =
          sz * sz > d1 * d1 / 12.0 ? alpha_optimal(d1, sz) : 1.0;
    }
  }
  auto rep = detail::finish_round(ctx, workers, server, rs);
  rep.decode_failures = failures;
  rep.failure_bound = failure_bound;
  return rep;
}

// ---------------------------------------------------------------------------

class Simulation {
 public:
  Simulation(ExperimentConfig cfg, std::shared_ptr<const Problem> problem,
             bool timing = false)
      : cfg_(std::move(cfg)), problem_(std::move(problem)) {
    cfg_.validate();
    GQ_REQUIRE(problem_ != nullptr, "simulation needs a problem");
    ctx_.problem = problem_.get();
    ctx_.scheme = cfg_.scheme();
    if (ctx_.scheme == Scheme::kDqsg || ctx_.scheme == Scheme::kQsgd ||
        ctx_.scheme == Scheme::kNdqsg) {
      ctx_.uniform = UniformQuantizerCfg::with_levels(cfg_.levels_m());
    } else {
      ctx_.uniform = UniformQuantizerCfg::with_levels(1);
    }
    ctx_.nested = NestedConfig{cfg_.nested_delta1, cfg_.nesting_k, 1.0};
    ctx_.alpha_mode = cfg_.alpha_mode;
    ctx_.partitions = cfg_.partitions;
    ctx_.batch = cfg_.batch;
    ctx_.master_seed = cfg_.master_seed;
    ctx_.timing = timing;
    if (cfg_.epoch_rounds > 0) {
      ctx_.epoch_rounds = cfg_.epoch_rounds;
    } else if (problem_->dataset_size() > 0) {
      ctx_.epoch_rounds =
          (problem_->dataset_size() + cfg_.batch - 1) / cfg_.batch;
    } else {
      ctx_.epoch_rounds = 100;
    }
    GQ_REQUIRE(cfg_.partitions <= problem_->dim(), "partitions ",
               cfg_.partitions, " exceed model dimension ", problem_->dim());
    if (problem_->dataset_size() > 0) {
      GQ_REQUIRE(cfg_.batch <= problem_->dataset_size(), "batch ", cfg_.batch,
                 " exceeds dataset size ", problem_->dataset_size());
    }

    double initial_alpha = 1.0;
    if (cfg_.alpha_mode != "one" && cfg_.alpha_mode != "auto") {
      initial_alpha = detail::parse_number<double>("alpha_mode", cfg_.alpha_mode);
    }
    const auto w0 = problem_->initial_point(mix64(cfg_.master_seed + 17));
    auto [p1, p2] = cfg_.group_sizes();
    (void)p2;
    for (std::size_t p = 0; p < cfg_.workers; ++p) {
      WorkerNode w;
      w.id = p;
      w.coords = {worker_seed(cfg_.master_seed, p), 0};
      w.group = p < p1 ? Group::kP1 : Group::kP2;
      w.opt = cfg_.optimizer == "adam"
                  ? make_adam(w0, cfg_.lr)
                  : make_sgd(w0, cfg_.lr,
                             cfg_.schedule == "inv_t" ? LrSchedule::kInverseTime
                                                      : LrSchedule::kConstant);
      w.opt.epoch_decay = cfg_.decay;
      w.onebit = OneBitState(problem_->dim());
      w.alpha = initial_alpha;
      workers_.push_back(std::move(w));
    }
    server_.mirrors.reserve(cfg_.workers);
    for (const auto& w : workers_) server_.mirrors.push_back(w.coords);
    server_.alpha.assign(cfg_.workers, initial_alpha);
    server_.z_sq_sum.assign(cfg_.workers, 0.0);
    server_.z_count.assign(cfg_.workers, 0);
    server_.average.assign(problem_->dim(), 0.0);
  }

  explicit Simulation(const ExperimentConfig& cfg, bool timing = false)
      : Simulation(cfg, make_problem(cfg), timing) {}

  RoundReport step() {
    if (ctx_.scheme == Scheme::kNdqsg) {
      return run_ndqsg_round(workers_, server_, ctx_);
    }
    return run_dqsgd_round(workers_, server_, ctx_);
  }

  std::vector<RoundReport> run() {
    std::vector<RoundReport> out;
    out.reserve(cfg_.rounds);
    for (std::size_t r = 0; r < cfg_.rounds; ++r) out.push_back(step());
    return out;
  }

  std::span<const double> params() const { return workers_.front().opt.w; }
  const ExperimentConfig& config() const { return cfg_; }
  const Problem& problem() const { return *problem_; }
  std::vector<WorkerNode>& workers() { return workers_; }
  ServerNode& server() { return server_; }
  const RoundContext& context() const { return ctx_; }

 private:
  ExperimentConfig cfg_;
  std::shared_ptr<const Problem> problem_;
  RoundContext ctx_;
  std::vector<WorkerNode> workers_;
  ServerNode server_;
};

// ---------------------------------------------------------------------------

inline const char* kCsvColumns =
    "round,wall_ms,loss,grad_norm,raw_bits_total,coded_bits_total,"
    "entropy_bits_total,excess_var,decode_failures";

inline void write_csv(std::ostream& out, const ExperimentConfig& cfg,
                      const std::vector<RoundReport>& reports) {
  out << "# gradquant " << kVersion << "\n";
  for (const auto& [k, v] : cfg.resolved()) out << "# " << k << "=" << v << "\n";
  out << kCsvColumns << "\n";
  char buf[512];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf),
                  "%llu,%.3f,%.12g,%.12g,%.6f,%llu,%.6f,%.12g,%llu\n",
                  static_cast<unsigned long long>(r.round), r.wall_ms, r.loss,
                  r.grad_norm, r.bits.raw_bits,
                  static_cast<unsigned long long>(r.bits.coded_bits),
                  r.bits.entropy_bits, r.excess_var,
                  static_cast<unsigned long long>(r.decode_failures));
    out << buf;
  }
}

inline std::vector<RoundReport> run_experiment(const ExperimentConfig& cfg,
                                               bool timing = false) {
  cfg.validate();
  Simulation sim(cfg, timing);
  return sim.run();
}

}  // namespace gradquant
