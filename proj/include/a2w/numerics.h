// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors
//
// Dense float64 tensors, the handful of kernels the network needs, the
// project RNG, and a central-difference gradient checker.

#ifndef A2W_NUMERICS_H_
#define A2W_NUMERICS_H_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace a2w {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Row-major dense tensor of doubles. Rank 1 and 2 are the only ranks the
// model uses, but nothing here restricts the rank.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Leading extent, and the product of the remaining extents.
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }

  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  void fill(double value);
  bool all_finite() const;

  // Throws a numeric error naming `what` if any entry is NaN or Inf.
  void require_finite(std::string_view what) const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Ordered collection of named tensors. Used for model weights, their
// gradients and optimizer moments, which all share one layout.
class ParamStore {
 public:
  Tensor& add(std::string name, Shape shape);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }

  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  // Same names and shapes, all values zero.
  ParamStore zeros_like() const;
  bool same_layout(const ParamStore& other) const;
  void set_zero();
  std::size_t num_values() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

// ---------------------------------------------------------------------------
// Kernels. All reductions run left to right over the summed index.

// a[m x k] * b[k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// c[m x n] += a[m x k] * b[k x n], raw row-major buffers.
void gemm_acc(std::span<const double> a, std::span<const double> b,
              std::span<double> c, std::size_t m, std::size_t k, std::size_t n);

// y[n] += x[k] * w[k x n].
void vecmat_acc(std::span<const double> x, const Tensor& w, std::span<double> y);

// x[k] += w[k x n] * g[n].
void matvec_acc(const Tensor& w, std::span<const double> g, std::span<double> x);

// w[k x n] += x[k] outer g[n].
void outer_acc(std::span<const double> x, std::span<const double> g, Tensor& w);

Tensor transpose(const Tensor& m);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor softmax(const Tensor& v);
void softmax_inplace(std::span<double> v);
// log(sum(exp(v))) with max subtraction.
double log_sum_exp(std::span<const double> v);

// Zero-padded "same" convolution of a 1-D signal with K kernels of odd
// width w. Result is [T x K]:
//   out[t, k] = sum_j kernels[k, j] * padded[t + j],  pad = (w - 1) / 2.
Tensor conv1d_same(std::span<const double> signal, const Tensor& kernels);
Tensor conv1d_same(const Tensor& signal, const Tensor& kernels);

// ---------------------------------------------------------------------------
// RNG: std::mt19937_64 (its output sequence is fixed by the C++ standard)
// with our own uniform/normal transforms so streams do not depend on the
// standard library's distribution implementations.

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  // Independent stream for a named purpose ("corpus", "init", "shuffle").
  static Rng derive(std::uint64_t seed, std::string_view purpose);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer on [lo, hi], inclusive. Rejection sampling, no modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Textual engine state (plus the cached normal) for checkpoints.
  std::string serialize() const;
  void deserialize(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.has_spare_ == b.has_spare_ &&
           (!a.has_spare_ || a.spare_ == b.spare_);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// 64-bit FNV-1a, used to derive per-purpose seeds.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);

// ---------------------------------------------------------------------------
// Gradient checking.

// Returns the loss at `params`; when `grads` is non-null, also writes the
// analytic gradient into it (same layout as params, overwritten).
using LossFn = std::function<double(const ParamStore& params, ParamStore* grads)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares the analytic gradient with central differences
// (L(p + h) - L(p - h)) / 2h on every coordinate. The relative error of a
// coordinate is |ga - gn| / max(1e-8, |ga| + |gn|).
GradCheckResult grad_check(const LossFn& loss_fn, const ParamStore& params,
                           double step);

}  // namespace a2w

#endif  // A2W_NUMERICS_H_
