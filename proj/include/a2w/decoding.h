// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#ifndef A2W_DECODING_H_
#define A2W_DECODING_H_

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "a2w/corpus.h"
#include "a2w/model.h"

namespace a2w {

struct DecodeResult {
  std::string utt_id;
  std::vector<std::string> hypothesis;  // without #eos#
  std::vector<int> token_ids;           // without #eos#
  AttentionTrace trace;                 // one row per step, #eos# step included
  std::vector<double> step_max_prob;    // max softmax probability per step
  double log_prob = 0.0;                // sum of token log-probabilities
  // max_len reached before #eos#; then the trace has one row per emitted
  // token and no #eos# row.
  bool truncated = false;
};

std::size_t default_max_len(std::size_t reduced_frames);

// Beam size 1: argmax at every step (ties toward the lower index) until
// #eos# or max_len tokens.
DecodeResult greedy_decode(const Utterance& utterance, const ModelParams& params,
                           const ModelConfig& config, const Vocabulary& vocab,
                           std::size_t max_len = 0);
DecodeResult greedy_decode(const Utterance& utterance, const EncoderStates& enc,
                           const ModelParams& params, const ModelConfig& config,
                           const Vocabulary& vocab, std::size_t max_len = 0);

// Length-normalized beam search (completed score = log prob / token count,
// #eos# counted). Hypotheses cut off by max_len compete too, divided by
// their token count, and come back flagged truncated. beam == 1 reproduces
// greedy_decode exactly.
DecodeResult beam_decode(const Utterance& utterance, const ModelParams& params,
                         const ModelConfig& config, const Vocabulary& vocab, int beam,
                         std::size_t max_len = 0);

// Search core, independent of the network. `step` maps (previous token,
// opaque decoder state) to (logits, next state, attention row).
struct SearchStep {
  std::vector<double> logits;
  DecoderState state;
  std::vector<double> alpha;
};
using StepFn = std::function<SearchStep(int y_prev, const DecoderState& state)>;

struct SearchResult {
  std::vector<int> tokens;  // without #eos#
  std::vector<std::vector<double>> alphas;
  std::vector<double> step_max_prob;
  double log_prob = 0.0;
  bool truncated = false;
};

SearchResult beam_search(const StepFn& step, const DecoderState& initial, int beam,
                         std::size_t max_len);

struct WerResult {
  double wer = 0.0;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int errors() const { return substitutions + deletions + insertions; }
};

// Unit-cost Levenshtein alignment. Among optimal alignments the one with the
// most substitutions is used, so swapping the arguments exchanges D and I;
// the backtrace prefers substitution (or match), then insertion, then
// deletion.
WerResult wer(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis);

// Corpus-level: total errors / total reference words.
double corpus_wer(const std::vector<std::vector<std::string>>& references,
                  const std::vector<std::vector<std::string>>& hypotheses);

// Hypothesis file: utt_id<TAB>space-separated words.
void write_hypotheses(const std::filesystem::path& path, const std::vector<DecodeResult>& results);

// "A2WA", u32 version, u32 id length + id bytes, u32 U, u32 T', U*T' f64.
std::string encode_trace(const std::string& utt_id, const AttentionTrace& trace);
std::pair<std::string, AttentionTrace> decode_trace(std::string bytes, const std::string& source);
void write_trace(const std::filesystem::path& path, const std::string& utt_id,
                 const AttentionTrace& trace);
std::pair<std::string, AttentionTrace> read_trace(const std::filesystem::path& path);

}  // namespace a2w

#endif  // A2W_DECODING_H_
