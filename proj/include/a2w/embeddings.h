// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors
//
// Speech-word-vectors: the top encoder state at the frame each emitted word
// attends to most. Nearest-neighbour search over them, plus PCA and exact
// t-SNE projections to 2-D.

#ifndef A2W_EMBEDDINGS_H_
#define A2W_EMBEDDINGS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "a2w/decoding.h"
#include "a2w/model.h"
#include "a2w/numerics.h"

namespace a2w {

struct SpeechWordVector {
  std::string utt_id;
  std::string word;
  int position = 0;  // index within the hypothesis; #eos# comes last
  std::vector<double> vector;

  friend bool operator==(const SpeechWordVector&, const SpeechWordVector&) = default;
};

// One vector per emitted word, plus one for #eos# when include_eos is set and
// the decode terminated. `enc` must be the encoding the decode ran on.
std::vector<SpeechWordVector> extract_embeddings(const DecodeResult& decode,
                                                 const EncoderStates& enc, bool include_eos = true);

enum class Metric { kCosine, kEuclidean };

struct Neighbor {
  std::size_t index = 0;  // into the pool
  std::string word;
  std::string utt_id;
  double score = 0.0;  // cosine similarity or euclidean distance
};

// Top k of `pool` (best first); equal scores keep pool order. Cosine with a
// zero vector is a numeric error.
std::vector<Neighbor> nearest_neighbors(std::span<const double> query,
                                        const std::vector<SpeechWordVector>& pool, std::size_t k,
                                        Metric metric = Metric::kCosine);
// Neighbours of pool[index] among the other entries of `pool`.
std::vector<Neighbor> nearest_neighbors_of(std::size_t index, const std::vector<SpeechWordVector>& pool,
                                           std::size_t k, Metric metric = Metric::kCosine);

struct PurityResult {
  std::size_t tokens = 0;     // tokens of word types with >= min_tokens occurrences
  std::size_t same_word = 0;  // of those, tokens whose 1-NN has the same word
  double purity() const { return tokens == 0 ? 0.0 : static_cast<double>(same_word) / tokens; }
};

PurityResult one_nn_purity(const std::vector<SpeechWordVector>& vectors, std::size_t min_tokens = 5,
                           Metric metric = Metric::kCosine);

// ---------------------------------------------------------------------------
// Projections

struct PcaResult {
  Tensor projection;                   // [N x out_dims]
  Tensor components;                   // [out_dims x D]
  std::vector<double> mean;            // [D]
  std::vector<double> explained_ratio; // per output axis
};

// Each component is sign-normalized so its largest-magnitude entry is positive.
PcaResult pca_project(const Tensor& x, std::size_t out_dims = 2);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iter = 250;
  double exaggeration = 12.0;
  int exaggeration_iters = 250;
  bool adaptive_gains = true;
  std::uint64_t seed = 0;

  void validate(std::size_t n_points) const;
};

struct TsneAffinities {
  Tensor p;                             // [N x N] symmetric joint probabilities
  std::vector<double> row_entropy_bits; // entropy of each conditional row
  std::vector<double> beta;             // precision 1 / (2 sigma^2) per point
};

// Per-point bandwidth by bisection so each conditional row has entropy
// log2(perplexity); fails after 200 halvings.
TsneAffinities tsne_affinities(const Tensor& x, double perplexity);

struct TsneResult {
  Tensor y;                 // [N x 2]
  std::vector<double> kl;   // KL(P || Q) before each update, then after the last
};

TsneResult tsne_project(const Tensor& x, const TsneConfig& config);

// Sorted sample of min(k, n) distinct indices, seeded.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

Tensor stack_vectors(const std::vector<SpeechWordVector>& vectors);

// ---------------------------------------------------------------------------
// Files

// "A2WE", u32 version, u32 count, u32 dim, then per record: utt_id and word
// (u32 length + bytes), u32 position, dim f64.
std::string encode_embeddings(const std::vector<SpeechWordVector>& vectors);
std::vector<SpeechWordVector> decode_embeddings(std::string bytes, const std::string& source);
void write_embeddings(const std::filesystem::path& path, const std::vector<SpeechWordVector>& vectors);
std::vector<SpeechWordVector> read_embeddings(const std::filesystem::path& path);

// utt_id<TAB>word<TAB>x<TAB>y
void write_projection(const std::filesystem::path& path, const std::vector<SpeechWordVector>& vectors,
                      const Tensor& y);

// query_word<TAB>rank<TAB>neighbor_word<TAB>score, ranks from 1.
std::string format_nn_report(const std::vector<SpeechWordVector>& queries,
                             const std::vector<std::vector<Neighbor>>& neighbors);

}  // namespace a2w

#endif  // A2W_EMBEDDINGS_H_
