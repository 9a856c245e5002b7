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

// Training problems with exact and stochastic gradient oracles.
//
//   GaussianQuadratic  L(w) = 1/2 ||w - w*||^2, sg = grad + N(0, s^2/b)
//   LeastSquares       L(w) = 1/(2m) sum (x_i.w - y_i)^2, noiseless labels
//   Logistic           L2-regularised logistic loss on two Gaussian blobs
//   Mlp                tanh MLP with softmax cross-entropy (two moons, MNIST)

#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gradquant/common.hpp"

namespace gradquant {

// Indices of the samples in a mini-batch; `size` is the batch size, and
// `seed` drives oracles that synthesise their own noise.
struct MiniBatch {
  std::uint64_t seed = 0;
  std::span<const std::size_t> indices;
  std::size_t size = 1;
};

class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  // Number of training samples; 0 for oracles that synthesise noise.
  virtual std::size_t dataset_size() const { return 0; }

  virtual double loss(std::span<const double> w) const = 0;
  virtual void gradient(std::span<const double> w,
                        std::span<double> out) const = 0;
  virtual void stochastic_gradient(std::span<const double> w,
                                   const MiniBatch& batch,
                                   std::span<double> out) const = 0;

  virtual std::vector<double> initial_point(std::uint64_t /*seed*/) const {
    return std::vector<double>(dim(), 0.0);
  }
  virtual std::optional<std::vector<double>> optimum() const {
    return std::nullopt;
  }
  // Lipschitz constant of the gradient, when known.
  virtual std::optional<double> smoothness() const { return std::nullopt; }
  // E||sg - grad||^2 for a batch of size b, when known analytically.
  virtual std::optional<double> variance_bound(std::size_t /*b*/) const {
    return std::nullopt;
  }

  GradientVector exact_grad(std::span<const double> w) const {
    std::vector<double> g(dim());
    gradient(w, g);
    return GradientVector(std::move(g));
  }
};

// ---------------------------------------------------------------------------

class GaussianQuadratic final : public Problem {
 public:
  GaussianQuadratic(std::vector<double> w_star, double noise_sigma)
      : w_star_(std::move(w_star)), sigma_(noise_sigma) {
    GQ_REQUIRE(!w_star_.empty(), "quadratic dimension must be >= 1");
    GQ_REQUIRE(sigma_ >= 0.0, "noise sigma must be nonnegative");
  }

  // w* drawn uniformly on the sphere of the given radius.
  static GaussianQuadratic random(std::size_t n, double radius,
                                  double noise_sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> w(n);
    for (auto& x : w) x = nd(rng);
    const double norm = std::sqrt(squared_norm(w));
    for (auto& x : w) x *= radius / norm;
    return GaussianQuadratic(std::move(w), noise_sigma);
  }

  std::string name() const override { return "quadratic"; }
  std::size_t dim() const override { return w_star_.size(); }
  double noise_sigma() const { return sigma_; }

  double loss(std::span<const double> w) const override {
    return 0.5 * squared_distance(w, w_star_);
  }
  void gradient(std::span<const double> w,
                std::span<double> out) const override {
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] - w_star_[i];
  }
  void stochastic_gradient(std::span<const double> w, const MiniBatch& batch,
                           std::span<double> out) const override {
    GQ_REQUIRE(batch.size >= 1, "batch size must be >= 1");
    gradient(w, out);
    std::mt19937_64 rng(batch.seed);
    std::normal_distribution<double> nd(
        0.0, sigma_ / std::sqrt(static_cast<double>(batch.size)));
    for (auto& g : out) g += nd(rng);
  }
  std::optional<std::vector<double>> optimum() const override {
    return w_star_;
  }
  std::optional<double> smoothness() const override { return 1.0; }
  std::optional<double> variance_bound(std::size_t b) const override {
    return static_cast<double>(dim()) * sigma_ * sigma_ / static_cast<double>(b);
  }

 private:
  std::vector<double> w_star_;
  double sigma_;
};

// ---------------------------------------------------------------------------
// Problems defined by an average of per-sample losses.

class DatasetProblem : public Problem {
 public:
  double loss(std::span<const double> w) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < dataset_size(); ++i) s += sample_loss(w, i);
    return s / static_cast<double>(dataset_size()) + regularizer(w);
  }
  void gradient(std::span<const double> w,
                std::span<double> out) const override {
    std::vector<std::size_t> all(dataset_size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    batch_gradient(w, all, out);
  }
  void stochastic_gradient(std::span<const double> w, const MiniBatch& batch,
                           std::span<double> out) const override {
    GQ_REQUIRE(!batch.indices.empty(), name(),
               ": stochastic gradient needs sample indices");
    batch_gradient(w, batch.indices, out);
  }

 protected:
  virtual double sample_loss(std::span<const double> w,
                             std::size_t i) const = 0;
  // out += scale * grad of sample i
  virtual void add_sample_gradient(std::span<const double> w, std::size_t i,
                                   double scale,
                                   std::span<double> out) const = 0;
  virtual double regularizer(std::span<const double>) const { return 0.0; }
  virtual void add_regularizer_gradient(std::span<const double>,
                                        std::span<double>) const {}

 private:
  void batch_gradient(std::span<const double> w,
                      std::span<const std::size_t> idx,
                      std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const double scale = 1.0 / static_cast<double>(idx.size());
    for (std::size_t i : idx) {
      GQ_REQUIRE(i < dataset_size(), "sample index ", i, " out of range");
      add_sample_gradient(w, i, scale, out);
    }
    add_regularizer_gradient(w, out);
  }
};

namespace detail {

// Largest eigenvalue of X^T X / m by power iteration (row-major X).
inline double gram_top_eigenvalue(const std::vector<double>& x, std::size_t m,
                                  std::size_t n) {
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n))), xv(m),
      next(n);
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    for (std::size_t r = 0; r < m; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += x[r * n + c] * v[c];
      xv[r] = s;
    }
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < n; ++c) next[c] += x[r * n + c] * xv[r];
    }
    for (auto& y : next) y /= static_cast<double>(m);
    const double norm = std::sqrt(squared_norm(next));
    if (norm == 0.0) return 0.0;
    for (std::size_t c = 0; c < n; ++c) v[c] = next[c] / norm;
    if (std::abs(norm - lambda) < 1e-13 * norm) return norm;
    lambda = norm;
  }
  return lambda;
}

}  // namespace detail

class LeastSquares final : public DatasetProblem {
 public:
  LeastSquares(std::size_t m, std::size_t n, std::uint64_t seed)
      : m_(m), n_(n), x_(m * n), y_(m), w_star_(n) {
    GQ_REQUIRE(m >= n && n >= 1, "least squares needs m >= n >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (auto& v : w_star_) v = nd(rng);
    for (auto& v : x_) v = nd(rng);
    for (std::size_t r = 0; r < m_; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n_; ++c) s += x_[r * n_ + c] * w_star_[c];
      y_[r] = s;
    }
    ell_ = detail::gram_top_eigenvalue(x_, m_, n_);
  }

  std::string name() const override { return "least_squares"; }
  std::size_t dim() const override { return n_; }
  std::size_t dataset_size() const override { return m_; }
  std::optional<std::vector<double>> optimum() const override {
    return w_star_;
  }
  std::optional<double> smoothness() const override { return ell_; }

 protected:
  double residual(std::span<const double> w, std::size_t i) const {
    double s = -y_[i];
    for (std::size_t c = 0; c < n_; ++c) s += x_[i * n_ + c] * w[c];
    return s;
  }
  double sample_loss(std::span<const double> w, std::size_t i) const override {
    const double r = residual(w, i);
    return 0.5 * r * r;
  }
  void add_sample_gradient(std::span<const double> w, std::size_t i,
                           double scale,
                           std::span<double> out) const override {
    const double r = scale * residual(w, i);
    for (std::size_t c = 0; c < n_; ++c) out[c] += r * x_[i * n_ + c];
  }

 private:
  std::size_t m_, n_;
  std::vector<double> x_, y_, w_star_;
  double ell_ = 0.0;
};

// Labels +-1, features (x1, x2, 1); blobs centred at +-(1, 1).
class Logistic final : public DatasetProblem {
 public:
  Logistic(std::size_t m, std::uint64_t seed, double reg = 1e-3)
      : m_(m), x_(m * kDim), y_(m), reg_(reg) {
    GQ_REQUIRE(m >= 2, "logistic needs at least two samples");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (std::size_t i = 0; i < m_; ++i) {
      y_[i] = (i % 2 == 0) ? 1.0 : -1.0;
      x_[i * kDim + 0] = y_[i] + nd(rng);
      x_[i * kDim + 1] = y_[i] + nd(rng);
      x_[i * kDim + 2] = 1.0;
    }
    ell_ = 0.25 * detail::gram_top_eigenvalue(x_, m_, kDim) + reg_;
    solve_optimum();
  }

  std::string name() const override { return "logistic"; }
  std::size_t dim() const override { return kDim; }
  std::size_t dataset_size() const override { return m_; }
  std::optional<std::vector<double>> optimum() const override {
    return w_star_;
  }
  std::optional<double> smoothness() const override { return ell_; }

 protected:
  double margin(std::span<const double> w, std::size_t i) const {
    double s = 0.0;
    for (std::size_t c = 0; c < kDim; ++c) s += x_[i * kDim + c] * w[c];
    return y_[i] * s;
  }
  double sample_loss(std::span<const double> w, std::size_t i) const override {
    const double z = margin(w, i);
    return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  }
  void add_sample_gradient(std::span<const double> w, std::size_t i,
                           double scale,
                           std::span<double> out) const override {
    const double z = margin(w, i);
    const double sig = 1.0 / (1.0 + std::exp(z));  // sigmoid(-z)
    const double coef = -scale * y_[i] * sig;
    for (std::size_t c = 0; c < kDim; ++c) out[c] += coef * x_[i * kDim + c];
  }
  double regularizer(std::span<const double> w) const override {
    return 0.5 * reg_ * squared_norm(w);
  }
  void add_regularizer_gradient(std::span<const double> w,
                                std::span<double> out) const override {
    for (std::size_t c = 0; c < kDim; ++c) out[c] += reg_ * w[c];
  }

 private:
  static constexpr std::size_t kDim = 3;

  // Full-batch gradient descent at step 1/ell; strongly convex, so this
  // converges linearly.
  void solve_optimum() {
    std::vector<double> w(kDim, 0.0), g(kDim);
    for (int it = 0; it < 200000; ++it) {
      gradient(w, g);
      if (std::sqrt(squared_norm(g)) < 1e-12) break;
      for (std::size_t c = 0; c < kDim; ++c) w[c] -= g[c] / ell_;
    }
    w_star_ = w;
  }

  std::size_t m_;
  std::vector<double> x_, y_;
  double reg_;
  double ell_ = 0.0;
  std::vector<double> w_star_;
};

// ---------------------------------------------------------------------------

struct Dataset {
  std::size_t features = 0;
  std::size_t classes = 0;
  std::vector<double> x;  // row-major, samples x features
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
};

// Two interleaving half circles with Gaussian jitter.
inline Dataset two_moons(std::size_t m, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> jitter(0.0, noise);
  Dataset d;
  d.features = 2;
  d.classes = 2;
  d.x.resize(2 * m);
  d.labels.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double t = angle(rng);
    const bool outer = (i % 2 == 0);
    double a = outer ? std::cos(t) : 1.0 - std::cos(t);
    double b = outer ? std::sin(t) : 0.5 - std::sin(t);
    d.x[2 * i] = a + jitter(rng);
    d.x[2 * i + 1] = b + jitter(rng);
    d.labels[i] = outer ? 0 : 1;
  }
  return d;
}

// Fully connected network: tanh hidden layers, softmax cross-entropy output.
// Parameters are laid out layer by layer as W (out x in, row-major) then b.
class Mlp final : public DatasetProblem {
 public:
  Mlp(std::vector<std::size_t> layers, Dataset data, std::string label = "mlp")
      : layers_(std::move(layers)), data_(std::move(data)),
        label_(std::move(label)) {
    GQ_REQUIRE(layers_.size() >= 2, "MLP needs at least two layer sizes");
    GQ_REQUIRE(layers_.front() == data_.features, "input width ",
               layers_.front(), " does not match ", data_.features,
               " features");
    GQ_REQUIRE(layers_.back() == data_.classes, "output width ",
               layers_.back(), " does not match ", data_.classes, " classes");
    GQ_REQUIRE(data_.size() >= 1, "MLP dataset is empty");
    n_params_ = parameter_count(layers_);
  }

  static std::size_t parameter_count(std::span<const std::size_t> layers) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      n += layers[l] * layers[l + 1] + layers[l + 1];
    }
    return n;
  }

  std::string name() const override { return label_; }
  std::size_t dim() const override { return n_params_; }
  std::size_t dataset_size() const override { return data_.size(); }
  const std::vector<std::size_t>& layers() const { return layers_; }

  // Glorot-uniform weights, zero biases.
  std::vector<double> initial_point(std::uint64_t seed) const override {
    std::vector<double> w(n_params_, 0.0);
    std::mt19937_64 rng(seed);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      const std::size_t in = layers_[l], out = layers_[l + 1];
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (std::size_t k = 0; k < in * out; ++k) w[off + k] = u(rng);
      off += in * out + out;
    }
    return w;
  }

  // Fraction of samples whose arg-max prediction matches the label.
  double accuracy(std::span<const double> w) const {
    std::size_t hits = 0;
    Workspace ws(layers_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      forward(w, i, ws);
      const auto& out = ws.act.back();
      auto best = std::max_element(out.begin(), out.end()) - out.begin();
      hits += static_cast<std::size_t>(best) == data_.labels[i];
    }
    return static_cast<double>(hits) / static_cast<double>(data_.size());
  }

 protected:
  double sample_loss(std::span<const double> w, std::size_t i) const override {
    Workspace ws(layers_);
    forward(w, i, ws);
    return -std::log(std::max(ws.act.back()[data_.labels[i]], 1e-300));
  }

  void add_sample_gradient(std::span<const double> w, std::size_t i,
                           double scale,
                           std::span<double> out) const override {
    thread_local Workspace ws;
    ws.resize(layers_);
    forward(w, i, ws);
    const std::size_t depth = layers_.size() - 1;
    // delta at the output: softmax - onehot
    auto& delta = ws.delta[depth];
    delta = ws.act[depth];
    delta[data_.labels[i]] -= 1.0;
    std::size_t off = n_params_;
    for (std::size_t l = depth; l-- > 0;) {
      const std::size_t in = layers_[l], outw = layers_[l + 1];
      off -= in * outw + outw;
      const auto& a = ws.act[l];
      const auto& d = ws.delta[l + 1];
      for (std::size_t r = 0; r < outw; ++r) {
        const double dr = scale * d[r];
        double* row = out.data() + off + r * in;
        for (std::size_t c = 0; c < in; ++c) row[c] += dr * a[c];
        out[off + in * outw + r] += dr;
      }
      if (l > 0) {
        auto& prev = ws.delta[l];
        for (std::size_t c = 0; c < in; ++c) {
          double s = 0.0;
          for (std::size_t r = 0; r < outw; ++r) {
            s += w[off + r * in + c] * d[r];
          }
          prev[c] = s * (1.0 - a[c] * a[c]);  // tanh'
        }
      }
    }
  }

 private:
  struct Workspace {
    std::vector<std::vector<double>> act, delta;
    Workspace() = default;
    explicit Workspace(const std::vector<std::size_t>& layers) {
      resize(layers);
    }
    void resize(const std::vector<std::size_t>& layers) {
      bool same = act.size() == layers.size();
      for (std::size_t l = 0; same && l < layers.size(); ++l) {
        same = act[l].size() == layers[l];
      }
      if (same) return;
      act.assign(layers.size(), {});
      delta.assign(layers.size(), {});
      for (std::size_t l = 0; l < layers.size(); ++l) {
        act[l].resize(layers[l]);
        delta[l].resize(layers[l]);
      }
    }
  };

  void forward(std::span<const double> w, std::size_t i, Workspace& ws) const {
    const std::size_t depth = layers_.size() - 1;
    std::copy_n(data_.x.begin() + static_cast<std::ptrdiff_t>(i * data_.features),
                data_.features, ws.act[0].begin());
    std::size_t off = 0;
    for (std::size_t l = 0; l < depth; ++l) {
      const std::size_t in = layers_[l], out = layers_[l + 1];
      const auto& a = ws.act[l];
      auto& z = ws.act[l + 1];
      for (std::size_t r = 0; r < out; ++r) {
        const double* row = w.data() + off + r * in;
        double s = w[off + in * out + r];
        for (std::size_t c = 0; c < in; ++c) s += row[c] * a[c];
        z[r] = s;
      }
      off += in * out + out;
      if (l + 1 < depth) {
        for (auto& v : z) v = std::tanh(v);
      } else {
        const double mx = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (auto& v : z) sum += (v = std::exp(v - mx));
        for (auto& v : z) v /= sum;
      }
    }
  }

  std::vector<std::size_t> layers_;
  Dataset data_;
  std::string label_;
  std::size_t n_params_ = 0;
};

}  // namespace gradquant
