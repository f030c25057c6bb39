// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#include "a2w/numerics.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "a2w/errors.h"

namespace a2w {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) {
    if (extent == 0) fail(ErrorKind::kDimension, "tensor extents must be positive: " + shape_string(shape));
    if (n > std::numeric_limits<std::size_t>::max() / extent) {
      fail(ErrorKind::kDimension, "tensor shape overflows: " + shape_string(shape));
    }
    n *= extent;
  }
  return n;
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::kDimension, what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(shape_product(shape_) == data_.size(),
          "tensor data length " + std::to_string(data_.size()) +
              " does not match shape " + shape_string(shape_));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    require(row.size() == c, "ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

std::size_t Tensor::cols() const {
  if (shape_.size() <= 1) return 1;
  std::size_t n = 1;
  for (std::size_t i = 1; i < shape_.size(); ++i) n *= shape_[i];
  return n;
}

std::span<double> Tensor::row(std::size_t r) {
  std::size_t c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const {
  std::size_t c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(std::string_view what) const {
  if (!all_finite()) fail(ErrorKind::kNumeric, "non-finite value in " + std::string(what));
}

// ---------------------------------------------------------------------------
// ParamStore

Tensor& ParamStore::add(std::string name, Shape shape) {
  if (contains(name)) fail(ErrorKind::kConfig, "duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  tensors_.emplace_back(std::move(shape));
  return tensors_.back();
}

std::size_t ParamStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return names_.size();
}

bool ParamStore::contains(std::string_view name) const { return index_of(name) < names_.size(); }

Tensor& ParamStore::at(std::string_view name) {
  std::size_t i = index_of(name);
  if (i == names_.size()) fail(ErrorKind::kData, "no parameter named " + std::string(name));
  return tensors_[i];
}

const Tensor& ParamStore::at(std::string_view name) const {
  std::size_t i = index_of(name);
  if (i == names_.size()) fail(ErrorKind::kData, "no parameter named " + std::string(name));
  return tensors_[i];
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].shape());
  return out;
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (tensors_[i].shape() != other.tensors_[i].shape()) return false;
  }
  return true;
}

void ParamStore::set_zero() {
  for (auto& t : tensors_) t.fill(0.0);
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

// ---------------------------------------------------------------------------
// Kernels

void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
              std::size_t m, std::size_t k, std::size_t n) {
  require(a.size() == m * k && b.size() == k * n && c.size() == m * n,
          "gemm_acc buffer sizes do not match m, k, n");
  // i-k-j order: each c[i, j] still accumulates over k left to right, and the
  // inner loop is a contiguous axpy.
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = arow[p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul needs rank-2 operands");
  require(a.shape()[1] == b.shape()[0], "matmul inner extents differ: " + shape_string(a.shape()) +
                                            " x " + shape_string(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor c({m, n});
  gemm_acc(a.values(), b.values(), c.values(), m, k, n);
  return c;
}

void vecmat_acc(std::span<const double> x, const Tensor& w, std::span<double> y) {
  const std::size_t k = w.rows(), n = w.cols();
  require(x.size() == k && y.size() == n, "vecmat_acc: x " + std::to_string(x.size()) + ", w " +
                                              shape_string(w.shape()) + ", y " +
                                              std::to_string(y.size()));
  const double* wd = w.data();
  for (std::size_t p = 0; p < k; ++p) {
    const double s = x[p];
    if (s == 0.0) continue;
    const double* wrow = wd + p * n;
    for (std::size_t j = 0; j < n; ++j) y[j] += s * wrow[j];
  }
}

void matvec_acc(const Tensor& w, std::span<const double> g, std::span<double> x) {
  const std::size_t k = w.rows(), n = w.cols();
  require(x.size() == k && g.size() == n, "matvec_acc: w " + shape_string(w.shape()) + ", g " +
                                              std::to_string(g.size()) + ", x " +
                                              std::to_string(x.size()));
  const double* wd = w.data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* wrow = wd + p * n;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += wrow[j] * g[j];
    x[p] += s;
  }
}

void outer_acc(std::span<const double> x, std::span<const double> g, Tensor& w) {
  const std::size_t k = w.rows(), n = w.cols();
  require(x.size() == k && g.size() == n, "outer_acc: x " + std::to_string(x.size()) + ", g " +
                                              std::to_string(g.size()) + ", w " +
                                              shape_string(w.shape()));
  double* wd = w.data();
  for (std::size_t p = 0; p < k; ++p) {
    const double s = x[p];
    if (s == 0.0) continue;
    double* wrow = wd + p * n;
    for (std::size_t j = 0; j < n; ++j) wrow[j] += s * g[j];
  }
}

Tensor transpose(const Tensor& m) {
  require(m.rank() == 2, "transpose needs a rank-2 tensor");
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out(j, i) = m(i, j);
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) fail(ErrorKind::kDimension, "softmax of an empty vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) {
    if (!std::isfinite(x)) fail(ErrorKind::kNumeric, "softmax input is not finite");
    mx = std::max(mx, x);
  }
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

Tensor softmax(const Tensor& v) {
  Tensor out = v;
  softmax_inplace(out.values());
  return out;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) fail(ErrorKind::kDimension, "log_sum_exp of an empty vector");
  double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) fail(ErrorKind::kNumeric, "log_sum_exp input is not finite");
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

Tensor conv1d_same(std::span<const double> signal, const Tensor& kernels) {
  require(kernels.rank() == 2, "conv1d_same kernels must be [K x w]");
  const std::size_t num_kernels = kernels.shape()[0];
  const std::size_t width = kernels.shape()[1];
  if (width % 2 == 0) {
    fail(ErrorKind::kConfig, "conv1d_same kernel width must be odd, got " + std::to_string(width));
  }
  if (signal.empty()) fail(ErrorKind::kDimension, "conv1d_same of an empty signal");
  const auto len = static_cast<std::ptrdiff_t>(signal.size());
  const auto pad = static_cast<std::ptrdiff_t>((width - 1) / 2);
  Tensor out({signal.size(), num_kernels});
  for (std::ptrdiff_t t = 0; t < len; ++t) {
    for (std::size_t k = 0; k < num_kernels; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) - pad;
        if (src < 0 || src >= len) continue;
        s += kernels(k, j) * signal[static_cast<std::size_t>(src)];
      }
      out(static_cast<std::size_t>(t), k) = s;
    }
  }
  return out;
}

Tensor conv1d_same(const Tensor& signal, const Tensor& kernels) {
  require(signal.rank() == 1, "conv1d_same signal must be rank 1");
  return conv1d_same(signal.values(), kernels);
}

// ---------------------------------------------------------------------------
// Rng

std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::derive(std::uint64_t seed, std::string_view purpose) {
  return Rng(splitmix64(seed ^ fnv1a64(purpose)));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) fail(ErrorKind::kDomain, "uniform_int with empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << seed_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << std::bit_cast<std::uint64_t>(spare_) << ' '
     << engine_;
  return os.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream is(state);
  int spare_flag = 0;
  std::uint64_t spare_bits = 0;
  Rng tmp;
  is >> tmp.seed_ >> spare_flag >> spare_bits >> tmp.engine_;
  if (!is) fail(ErrorKind::kFormat, "malformed RNG state");
  tmp.has_spare_ = spare_flag != 0;
  tmp.spare_ = std::bit_cast<double>(spare_bits);
  *this = tmp;
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckResult grad_check(const LossFn& loss_fn, const ParamStore& params, double step) {
  if (!(step >= 1e-6 && step <= 1e-4)) {
    fail(ErrorKind::kDomain, "grad_check step must lie in [1e-6, 1e-4]");
  }
  ParamStore analytic = params.zeros_like();
  const double base = loss_fn(params, &analytic);
  const double again = loss_fn(params, nullptr);
  if (std::bit_cast<std::uint64_t>(base) != std::bit_cast<std::uint64_t>(again)) {
    fail(ErrorKind::kNumeric, "grad_check: loss function is not deterministic");
  }
  if (!analytic.same_layout(params)) {
    fail(ErrorKind::kDimension, "grad_check: gradient layout differs from parameters");
  }

  GradCheckResult result;
  ParamStore probe = params;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    Tensor& tensor = probe[p];
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double original = tensor[i];
      tensor[i] = original + step;
      const double plus = loss_fn(probe, nullptr);
      tensor[i] = original - step;
      const double minus = loss_fn(probe, nullptr);
      tensor[i] = original;

      const double numeric = (plus - minus) / (2.0 * step);
      const double ga = analytic[p][i];
      const double rel = std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric));
      ++result.coordinates;
      if (rel > result.max_relative_error || !std::isfinite(rel)) {
        result.max_relative_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        result.worst_param = probe.name(p);
        result.worst_index = i;
        result.worst_analytic = ga;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace a2w
