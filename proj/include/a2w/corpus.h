// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors
//
// Synthetic word-sequence feature corpus: vocabulary, utterances with
// frame-level word alignments, transcript preprocessing, and the on-disk
// layout of a corpus directory:
//
//   vocab.txt         one word per line, line number = index
//   transcripts.txt   utt_id<TAB>space-separated words
//   alignments.txt    utt_id<TAB>word<TAB>start_frame<TAB>end_frame
//   train.lst         utt_id<TAB>relative feature path   (also val.lst, test.lst)
//   feats/<id>.a2wf   binary feature matrix
//
// Frames are 10 ms input frames.

#ifndef A2W_CORPUS_H_
#define A2W_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "a2w/numerics.h"

namespace a2w {

inline constexpr int kEosId = 0;
inline constexpr int kSosId = 1;
inline constexpr int kUnkId = 2;
inline constexpr std::string_view kEosToken = "#eos#";
inline constexpr std::string_view kSosToken = "#sos#";
inline constexpr std::string_view kUnkToken = "#unk#";

inline constexpr double kFrameShiftSeconds = 0.010;

class Vocabulary {
 public:
  // Starts with the three reserved tokens.
  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& words);

  // Returns the index of `word`, adding it if new.
  int add(std::string_view word);
  // Index of `word`, or kUnkId when absent.
  int id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word(int id) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

struct WordAlignment {
  std::string word;
  int start_frame = 0;
  int end_frame = 0;  // inclusive

  friend bool operator==(const WordAlignment&, const WordAlignment&) = default;
};

struct Utterance {
  std::string id;
  Tensor features;  // [T x d]
  std::vector<std::string> words;
  std::optional<std::vector<WordAlignment>> alignments;

  std::size_t num_frames() const { return features.rows(); }
};

struct Corpus {
  std::vector<Utterance> train, val, test;
  Vocabulary vocab;

  const std::vector<Utterance>& split(std::string_view name) const;
};

struct WordTemplate {
  std::string word;
  Tensor prototype;  // [L x d]
  int duration() const { return static_cast<int>(prototype.rows()); }
};

struct CorpusConfig {
  int vocab_size = 12;         // words, excluding the reserved tokens
  int num_utterances = 360;
  int min_words = 3;
  int max_words = 8;
  int feature_dim = 16;
  double noise = 0.05;         // std of additive Gaussian noise
  double jitter = 0.1;         // time-warp factor drawn from [1 - j, 1 + j]
  int min_duration = 8;        // template length bounds, frames
  int max_duration = 40;
  int pause_frames = 0;        // silence frames between words
  double train_fraction = 5.0 / 6.0;
  double val_fraction = 1.0 / 9.0;
  double test_fraction = 1.0 / 18.0;

  void validate() const;
};

// Built-in word inventory the generator draws from, in vocabulary order.
const std::vector<std::string>& builtin_lexicon();

// Splits a token before each interior apostrophe, the new piece keeping
// the apostrophe: "they're" -> "they", "'re". An apostrophe at the start
// or end of a token is not a split point.
std::vector<std::string> split_compounds(const std::vector<std::string>& transcript);

// Keeps utterances with at least `min_words` words, in order.
std::vector<Utterance> filter_short(const std::vector<Utterance>& utterances, int min_words = 3);

int time_to_frame(double seconds);

// Smooth random trajectory for `word`: cumulative Gaussian steps, each
// dimension mean-centered. Depends only on (corpus_seed, word, config).
WordTemplate make_template(std::uint64_t corpus_seed, const std::string& word,
                           const CorpusConfig& config);

// Realization of a template: linear time warp to round(L * factor) frames.
Tensor warp_template(const Tensor& prototype, double factor);

// Pure function of (config, rng seed/state). Split sizes are
// floor(N * fraction) for val and test; the remainder goes to train.
Corpus generate_corpus(const CorpusConfig& config, Rng& rng);

// ---------------------------------------------------------------------------
// File formats

// "A2WF", u32 version=1, u32 T, u32 d, T*d float32 row-major. Values are
// stored as float32 and widened on read.
void write_features(const std::filesystem::path& path, const Tensor& features);
Tensor read_features(const std::filesystem::path& path);
std::string encode_features(const Tensor& features);
Tensor decode_features(std::string bytes, const std::string& source);

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::filesystem::path& path);

using TranscriptMap = std::map<std::string, std::vector<std::string>>;
using AlignmentMap = std::map<std::string, std::vector<WordAlignment>>;

void write_transcripts(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::vector<std::string>>>& rows);
TranscriptMap read_transcripts(const std::filesystem::path& path);

void write_alignments(const std::filesystem::path& path, const std::vector<Utterance>& utterances);
AlignmentMap read_alignments(const std::filesystem::path& path);

// Writes the full corpus directory tree.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);
// Reads a single split ("train", "val" or "test") plus the vocabulary.
std::vector<Utterance> read_split(const std::filesystem::path& dir, std::string_view split,
                                  const Vocabulary* vocab_check = nullptr);

}  // namespace a2w

#endif  // A2W_CORPUS_H_
