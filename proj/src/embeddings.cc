// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#include "a2w/embeddings.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "a2w/analysis.h"
#include "a2w/binary_io.h"
#include "a2w/errors.h"

namespace a2w {

std::vector<SpeechWordVector> extract_embeddings(const DecodeResult& decode,
                                                 const EncoderStates& enc, bool include_eos) {
  std::size_t rows = decode.hypothesis.size();
  const bool with_eos = include_eos && !decode.truncated;
  if (with_eos) ++rows;
  const BoundaryPrediction b = predict_boundaries(decode.trace, rows);
  std::vector<SpeechWordVector> out;
  for (std::size_t k = 0; k < rows; ++k) {
    const auto r = static_cast<std::size_t>(b.words[k].reduced_frame);
    if (r >= enc.frames()) {
      fail(ErrorKind::kDomain, decode.utt_id + ": reduced frame " + std::to_string(r) +
                                   " outside " + std::to_string(enc.frames()) + " encoder frames");
    }
    auto h = enc.h.row(r);
    SpeechWordVector v;
    v.utt_id = decode.utt_id;
    v.word = k < decode.hypothesis.size() ? decode.hypothesis[k] : std::string(kEosToken);
    v.position = static_cast<int>(k);
    v.vector.assign(h.begin(), h.end());
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double score_for(std::span<const double> q, double q_norm, std::span<const double> p, Metric metric) {
  if (metric == Metric::kCosine) {
    const double n = norm2(p);
    if (n == 0.0) fail(ErrorKind::kNumeric, "cosine similarity with a zero vector");
    return dot(q, p) / (q_norm * n);
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) sq += (q[i] - p[i]) * (q[i] - p[i]);
  return std::sqrt(sq);
}

std::vector<Neighbor> rank(std::span<const double> query, const std::vector<SpeechWordVector>& pool,
                           std::size_t k, Metric metric, std::size_t skip) {
  const std::size_t available = pool.size() - (skip < pool.size() ? 1 : 0);
  if (k > available) {
    fail(ErrorKind::kDomain, "k = " + std::to_string(k) + " exceeds pool size " +
                                 std::to_string(available));
  }
  double q_norm = 0.0;
  if (metric == Metric::kCosine) {
    q_norm = norm2(query);
    if (q_norm == 0.0) fail(ErrorKind::kNumeric, "cosine similarity with a zero query vector");
  }
  std::vector<Neighbor> all;
  all.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i == skip) continue;
    if (pool[i].vector.size() != query.size()) {
      fail(ErrorKind::kDimension, "embedding dimension mismatch in nearest-neighbour pool");
    }
    all.push_back({i, pool[i].word, pool[i].utt_id, score_for(query, q_norm, pool[i].vector, metric)});
  }
  const bool descending = metric == Metric::kCosine;
  std::stable_sort(all.begin(), all.end(), [descending](const Neighbor& a, const Neighbor& b) {
    return descending ? a.score > b.score : a.score < b.score;
  });
  all.resize(k);
  return all;
}

}  // namespace

std::vector<Neighbor> nearest_neighbors(std::span<const double> query,
                                        const std::vector<SpeechWordVector>& pool, std::size_t k,
                                        Metric metric) {
  return rank(query, pool, k, metric, std::numeric_limits<std::size_t>::max());
}

std::vector<Neighbor> nearest_neighbors_of(std::size_t index, const std::vector<SpeechWordVector>& pool,
                                           std::size_t k, Metric metric) {
  if (index >= pool.size()) fail(ErrorKind::kDomain, "query index outside the pool");
  return rank(pool[index].vector, pool, k, metric, index);
}

PurityResult one_nn_purity(const std::vector<SpeechWordVector>& vectors, std::size_t min_tokens,
                           Metric metric) {
  std::map<std::string, std::size_t> counts;
  for (const auto& v : vectors) ++counts[v.word];
  PurityResult r;
  if (vectors.size() < 2) return r;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (counts[vectors[i].word] < min_tokens) continue;
    ++r.tokens;
    if (nearest_neighbors_of(i, vectors, 1, metric)[0].word == vectors[i].word) ++r.same_word;
  }
  return r;
}

// ---------------------------------------------------------------------------
// PCA

PcaResult pca_project(const Tensor& x, std::size_t out_dims) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) fail(ErrorKind::kDomain, "pca_project needs at least 2 points");
  if (out_dims < 1 || out_dims > d) {
    fail(ErrorKind::kDomain, "pca_project: cannot project " + std::to_string(d) + "-D data to " +
                                 std::to_string(out_dims) + " dimensions");
  }
  x.require_finite("pca input");
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> xm(x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mean = xm.colwise().mean();
  const Mat centered = xm.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) fail(ErrorKind::kNumeric, "pca eigendecomposition failed");

  PcaResult r;
  r.mean.assign(mean.data(), mean.data() + d);
  r.components = Tensor({out_dims, d});
  double total = std::max(cov.trace(), 0.0);
  // Eigenvalues come in ascending order.
  for (std::size_t a = 0; a < out_dims; ++a) {
    const auto col = static_cast<Eigen::Index>(d - 1 - a);
    Eigen::VectorXd u = solver.eigenvectors().col(col);
    Eigen::Index big = 0;
    for (Eigen::Index i = 1; i < u.size(); ++i) {
      if (std::abs(u(i)) > std::abs(u(big))) big = i;
    }
    if (u(big) < 0) u = -u;
    for (std::size_t j = 0; j < d; ++j) r.components(a, j) = u(static_cast<Eigen::Index>(j));
    const double lambda = std::max(solver.eigenvalues()(col), 0.0);
    r.explained_ratio.push_back(total > 0.0 ? lambda / total : 0.0);
  }
  r.projection = Tensor({n, out_dims});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < out_dims; ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += centered(i, j) * r.components(a, j);
      r.projection(i, a) = s;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// t-SNE

void TsneConfig::validate(std::size_t n_points) const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kConfig, "t-SNE: " + what); };
  if (n_points < 4) bad("needs at least 4 points, got " + std::to_string(n_points));
  if (!(perplexity > 0.0)) bad("perplexity must be > 0");
  if (!(perplexity < (static_cast<double>(n_points) - 1.0) / 3.0)) {
    bad("perplexity " + format_double(perplexity) + " must be below (N - 1) / 3 for N = " +
        std::to_string(n_points));
  }
  if (iterations < 1) bad("iterations must be >= 1");
  if (!(learning_rate > 0.0)) bad("learning rate must be > 0");
  if (exaggeration_iters < 0 || momentum_switch_iter < 0) bad("schedule iterations must be >= 0");
  if (!(exaggeration >= 1.0)) bad("exaggeration must be >= 1");
}

namespace {

Tensor squared_distances(const Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x(i, k) - x(j, k);
        s += diff * diff;
      }
      out(i, j) = out(j, i) = s;
    }
  }
  return out;
}

// Entropy (nats) and probabilities of one conditional row at precision beta.
double row_entropy(const Tensor& d2, std::size_t i, double beta, double d_min,
                   std::vector<double>& p) {
  const std::size_t n = d2.rows();
  double sum = 0.0, weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      p[j] = 0.0;
      continue;
    }
    const double shifted = d2(i, j) - d_min;
    p[j] = std::exp(-beta * shifted);
    sum += p[j];
    weighted += shifted * p[j];
  }
  for (double& v : p) v /= sum;
  return std::log(sum) + beta * weighted / sum;
}

constexpr int kMaxHalvings = 200;
constexpr double kEntropyTolBits = 1e-8;

}  // namespace

TsneAffinities tsne_affinities(const Tensor& x, double perplexity) {
  const std::size_t n = x.rows();
  if (n < 2) fail(ErrorKind::kDomain, "t-SNE affinities need at least 2 points");
  x.require_finite("t-SNE input");
  const Tensor d2 = squared_distances(x);
  const double target_bits = std::log2(perplexity);
  TsneAffinities out;
  out.p = Tensor({n, n});
  out.row_entropy_bits.resize(n);
  out.beta.resize(n);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d_min = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d_min = std::min(d_min, d2(i, j));
    }
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double h_bits = 0.0;
    bool converged = false;
    for (int it = 0; it < kMaxHalvings; ++it) {
      h_bits = row_entropy(d2, i, beta, d_min, row) / std::log(2.0);
      const double diff = h_bits - target_bits;
      if (std::abs(diff) <= kEntropyTolBits) {
        converged = true;
        break;
      }
      // Entropy falls as beta grows.
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    if (!converged) {
      fail(ErrorKind::kNumeric, "perplexity search did not converge for point " + std::to_string(i) +
                                    " (entropy " + format_double(h_bits) + " bits, target " +
                                    format_double(target_bits) + ")");
    }
    out.row_entropy_bits[i] = h_bits;
    out.beta[i] = beta;
    for (std::size_t j = 0; j < n; ++j) out.p(i, j) = row[j];
  }
  // Symmetrize: p_ij = (p_j|i + p_i|j) / 2N.
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = (out.p(i, j) + out.p(j, i)) / denom;
      out.p(i, j) = out.p(j, i) = v;
    }
  }
  return out;
}

namespace {

// Exact duplicate rows make the bandwidth search degenerate; nudge all but
// the first copy by a tiny seeded offset.
Tensor jitter_duplicates(const Tensor& x, std::uint64_t seed) {
  Tensor out = x;
  Rng rng = Rng::derive(seed, "tsne-jitter");
  const std::size_t n = x.rows(), d = x.cols();
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::equal(out.row(i).begin(), out.row(i).end(), out.row(j).begin())) {
        for (std::size_t k = 0; k < d; ++k) out(i, k) += 1e-10 * rng.normal();
        break;
      }
    }
  }
  return out;
}

constexpr double kQFloor = 1e-12;

double kl_divergence(const Tensor& p, const Tensor& num, double z) {
  const std::size_t n = p.rows();
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      const double q = std::max(num(i, j) / z, kQFloor);
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  }
  return kl;
}

// Student-t numerators and their sum.
double student_t(const Tensor& y, Tensor& num) {
  const std::size_t n = y.rows();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num(i, j) = num(j, i) = v;
      z += 2.0 * v;
    }
  }
  return z;
}

}  // namespace

TsneResult tsne_project(const Tensor& x, const TsneConfig& config) {
  const std::size_t n = x.rows();
  config.validate(n);
  const TsneAffinities aff = tsne_affinities(jitter_duplicates(x, config.seed), config.perplexity);
  const Tensor& p = aff.p;

  Rng rng = Rng::derive(config.seed, "tsne-init");
  TsneResult r;
  r.y = Tensor({n, 2});
  for (double& v : r.y.values()) v = 1e-4 * rng.normal();
  Tensor update({n, 2}, 0.0), gains({n, 2}, 1.0), grad({n, 2}), num({n, n});

  for (int it = 0; it < config.iterations; ++it) {
    const double z = student_t(r.y, num);
    r.kl.push_back(kl_divergence(p, num, z));
    const double exag = it < config.exaggeration_iters ? config.exaggeration : 1.0;
    grad.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = std::max(num(i, j) / z, kQFloor);
        const double m = 4.0 * (exag * p(i, j) - q) * num(i, j);
        grad(i, 0) += m * (r.y(i, 0) - r.y(j, 0));
        grad(i, 1) += m * (r.y(i, 1) - r.y(j, 1));
      }
    }
    const double momentum =
        it < config.momentum_switch_iter ? config.initial_momentum : config.final_momentum;
    for (std::size_t k = 0; k < grad.size(); ++k) {
      if (config.adaptive_gains) {
        const bool same_sign = (grad[k] > 0.0) == (update[k] > 0.0);
        gains[k] = same_sign ? gains[k] * 0.8 : gains[k] + 0.2;
        gains[k] = std::max(gains[k], 0.01);
      }
      update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
      r.y[k] += update[k];
    }
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += r.y(i, c);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) r.y(i, c) -= mean;
    }
    if (!r.y.all_finite()) {
      fail(ErrorKind::kNumeric, "t-SNE diverged at iteration " + std::to_string(it));
    }
  }
  r.kl.push_back(kl_divergence(p, num, student_t(r.y, num)));
  return r;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, "sample");
  rng.shuffle(idx);
  idx.resize(std::min(k, n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Tensor stack_vectors(const std::vector<SpeechWordVector>& vectors) {
  if (vectors.empty()) fail(ErrorKind::kDomain, "no embeddings to stack");
  const std::size_t d = vectors.front().vector.size();
  Tensor out({vectors.size(), d});
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].vector.size() != d) fail(ErrorKind::kDimension, "embeddings differ in dimension");
    std::copy(vectors[i].vector.begin(), vectors[i].vector.end(), out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {
constexpr std::string_view kEmbeddingMagic = "A2WE";
constexpr std::uint32_t kEmbeddingVersion = 1;
}  // namespace

std::string encode_embeddings(const std::vector<SpeechWordVector>& vectors) {
  const std::size_t dim = vectors.empty() ? 0 : vectors.front().vector.size();
  ByteWriter w;
  w.bytes(kEmbeddingMagic);
  w.u32(kEmbeddingVersion);
  w.u32(static_cast<std::uint32_t>(vectors.size()));
  w.u32(static_cast<std::uint32_t>(dim));
  for (const auto& v : vectors) {
    if (v.vector.size() != dim) fail(ErrorKind::kDimension, "embeddings differ in dimension");
    w.str(v.utt_id);
    w.str(v.word);
    w.u32(static_cast<std::uint32_t>(v.position));
    for (double x : v.vector) w.f64(x);
  }
  return w.buffer();
}

std::vector<SpeechWordVector> decode_embeddings(std::string bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.expect_magic(kEmbeddingMagic);
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingVersion) {
    fail(ErrorKind::kFormat, source + ": unsupported embedding version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  std::vector<SpeechWordVector> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    SpeechWordVector v;
    v.utt_id = r.str();
    v.word = r.str();
    v.position = static_cast<int>(r.u32());
    v.vector.resize(dim);
    for (double& x : v.vector) x = r.f64();
    out.push_back(std::move(v));
  }
  r.expect_end();
  return out;
}

void write_embeddings(const std::filesystem::path& path, const std::vector<SpeechWordVector>& vectors) {
  write_file_atomic(path, encode_embeddings(vectors));
}

std::vector<SpeechWordVector> read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file(path), path.string());
}

void write_projection(const std::filesystem::path& path, const std::vector<SpeechWordVector>& vectors,
                      const Tensor& y) {
  if (y.rows() != vectors.size() || y.cols() != 2) {
    fail(ErrorKind::kDimension, "projection shape " + shape_string(y.shape()) + " does not match " +
                                    std::to_string(vectors.size()) + " points");
  }
  std::string out;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    out += vectors[i].utt_id + "\t" + vectors[i].word + "\t" + format_double(y(i, 0)) + "\t" +
           format_double(y(i, 1)) + "\n";
  }
  write_file_atomic(path, out);
}

std::string format_nn_report(const std::vector<SpeechWordVector>& queries,
                             const std::vector<std::vector<Neighbor>>& neighbors) {
  if (queries.size() != neighbors.size()) {
    fail(ErrorKind::kDimension, "nn report: query and result counts differ");
  }
  std::string out;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t r = 0; r < neighbors[q].size(); ++r) {
      out += queries[q].word + "\t" + std::to_string(r + 1) + "\t" + neighbors[q][r].word + "\t" +
             format_double(neighbors[q][r].score) + "\n";
    }
  }
  return out;
}

}  // namespace a2w
