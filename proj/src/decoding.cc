// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#include "a2w/decoding.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "a2w/binary_io.h"
#include "a2w/errors.h"

namespace a2w {

std::size_t default_max_len(std::size_t reduced_frames) { return 2 * reduced_frames + 10; }

namespace {

std::size_t argmax_first(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

AttentionTrace stack_rows(const std::vector<std::vector<double>>& rows, std::size_t frames) {
  AttentionTrace trace;
  trace.alpha = rows.empty() ? Tensor() : Tensor({rows.size(), frames});
  for (std::size_t u = 0; u < rows.size(); ++u) {
    std::copy(rows[u].begin(), rows[u].end(), trace.alpha.row(u).begin());
  }
  return trace;
}

}  // namespace

DecodeResult greedy_decode(const Utterance& utterance, const EncoderStates& enc,
                           const ModelParams& params, const ModelConfig& config,
                           const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) max_len = default_max_len(enc.frames());
  DecodeResult result;
  result.utt_id = utterance.id;
  std::vector<std::vector<double>> rows;
  DecoderState state = initial_decoder_state(config, enc.frames());
  int y_prev = kSosId;
  result.truncated = true;
  for (std::size_t step = 0; step < max_len; ++step) {
    StepOutput out = decode_step(y_prev, state, enc, params, config);
    const double lse = log_sum_exp(out.logits);
    const std::size_t k = argmax_first(out.logits);
    rows.push_back(std::move(out.alpha));
    result.step_max_prob.push_back(std::exp(out.logits[k] - lse));
    result.log_prob += out.logits[k] - lse;
    if (static_cast<int>(k) == kEosId) {
      result.truncated = false;
      break;
    }
    result.token_ids.push_back(static_cast<int>(k));
    result.hypothesis.push_back(vocab.word(static_cast<int>(k)));
    y_prev = static_cast<int>(k);
    state = std::move(out.state);
  }
  result.trace = stack_rows(rows, enc.frames());
  return result;
}

DecodeResult greedy_decode(const Utterance& utterance, const ModelParams& params,
                           const ModelConfig& config, const Vocabulary& vocab,
                           std::size_t max_len) {
  const EncoderStates enc = encode(utterance.features, params, config);
  return greedy_decode(utterance, enc, params, config, vocab, max_len);
}

SearchResult beam_search(const StepFn& step, const DecoderState& initial, int beam,
                         std::size_t max_len) {
  if (beam < 1) fail(ErrorKind::kDomain, "beam must be >= 1");
  if (max_len < 1) fail(ErrorKind::kDomain, "max_len must be >= 1");
  struct Hyp {
    SearchResult partial;
    DecoderState state;
    int last = kSosId;
  };
  struct Candidate {
    std::size_t parent;
    int token;
    double score;
    double logit;
  };
  struct Completed {
    SearchResult result;
    double normalized;
  };

  std::vector<Hyp> live(1);
  live[0].state = initial;
  std::vector<Completed> completed;
  const auto width = static_cast<std::size_t>(beam);

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<SearchStep> outs;
    std::vector<Candidate> candidates;
    for (std::size_t h = 0; h < live.size(); ++h) {
      outs.push_back(step(live[h].last, live[h].state));
      const auto& logits = outs.back().logits;
      const double lse = log_sum_exp(logits);
      for (std::size_t k = 0; k < logits.size(); ++k) {
        candidates.push_back({h, static_cast<int>(k), live[h].partial.log_prob + (logits[k] - lse),
                              logits[k]});
      }
    }
    // Raw logits break ties that rounding creates in the cumulative score,
    // which keeps beam 1 identical to a plain argmax.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       if (a.score != b.score) return a.score > b.score;
                       if (a.logit != b.logit) return a.logit > b.logit;
                       if (a.parent != b.parent) return a.parent < b.parent;
                       return a.token < b.token;
                     });
    std::vector<Hyp> next;
    for (std::size_t c = 0; c < candidates.size() && c < width; ++c) {
      const Candidate& cand = candidates[c];
      const Hyp& parent = live[cand.parent];
      const SearchStep& out = outs[cand.parent];
      const double lse = log_sum_exp(out.logits);
      Hyp child;
      child.partial = parent.partial;
      child.partial.alphas.push_back(out.alpha);
      child.partial.step_max_prob.push_back(
          std::exp(out.logits[argmax_first(out.logits)] - lse));
      child.partial.log_prob = cand.score;
      if (cand.token == kEosId) {
        const double len = static_cast<double>(child.partial.tokens.size() + 1);
        completed.push_back({std::move(child.partial), cand.score / len});
        continue;
      }
      child.partial.tokens.push_back(cand.token);
      child.state = out.state;
      child.last = cand.token;
      next.push_back(std::move(child));
    }
    live = std::move(next);
    if (completed.size() >= width) break;
  }

  // Hypotheses still running at max_len compete with the completed ones,
  // normalized by their token count.
  if (completed.size() < width) {
    for (auto& h : live) {
      const double len = static_cast<double>(std::max<std::size_t>(h.partial.tokens.size(), 1));
      const double normalized = h.partial.log_prob / len;
      h.partial.truncated = true;
      completed.push_back({std::move(h.partial), normalized});
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < completed.size(); ++i) {
    if (completed[i].normalized > completed[best].normalized) best = i;
  }
  return completed[best].result;
}

DecodeResult beam_decode(const Utterance& utterance, const ModelParams& params,
                         const ModelConfig& config, const Vocabulary& vocab, int beam,
                         std::size_t max_len) {
  const EncoderStates enc = encode(utterance.features, params, config);
  if (max_len == 0) max_len = default_max_len(enc.frames());
  StepFn step = [&](int y_prev, const DecoderState& state) {
    StepOutput out = decode_step(y_prev, state, enc, params, config);
    return SearchStep{std::move(out.logits), std::move(out.state), std::move(out.alpha)};
  };
  SearchResult found = beam_search(step, initial_decoder_state(config, enc.frames()), beam, max_len);
  DecodeResult result;
  result.utt_id = utterance.id;
  result.token_ids = found.tokens;
  for (int id : found.tokens) result.hypothesis.push_back(vocab.word(id));
  result.trace = stack_rows(found.alphas, enc.frames());
  result.step_max_prob = std::move(found.step_max_prob);
  result.log_prob = found.log_prob;
  result.truncated = found.truncated;
  return result;
}

// ---------------------------------------------------------------------------
// WER

WerResult wer(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis) {
  if (reference.empty()) fail(ErrorKind::kDomain, "wer: empty reference");
  const std::size_t n = reference.size(), m = hypothesis.size();
  // Cells hold (edits, insertions + deletions), compared lexicographically:
  // among minimum-edit alignments the one with the most substitutions wins.
  // That fixes D and I uniquely, since D - I = n - m.
  using Cost = std::pair<int, int>;
  std::vector<std::vector<Cost>> d(n + 1, std::vector<Cost>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = {static_cast<int>(i), static_cast<int>(i)};
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = {static_cast<int>(j), static_cast<int>(j)};
  auto plus = [](Cost c, int edit, int indel) { return Cost{c.first + edit, c.second + indel}; };
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int mismatch = reference[i - 1] == hypothesis[j - 1] ? 0 : 1;
      d[i][j] = std::min({plus(d[i - 1][j - 1], mismatch, 0), plus(d[i][j - 1], 1, 1),
                          plus(d[i - 1][j], 1, 1)});
    }
  }
  // Backtrace preferring substitution (or match), then insertion, then deletion.
  WerResult r;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      if (d[i][j] == plus(d[i - 1][j - 1], same ? 0 : 1, 0)) {
        if (!same) ++r.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && d[i][j] == plus(d[i][j - 1], 1, 1)) {
      ++r.insertions;
      --j;
    } else {
      ++r.deletions;
      --i;
    }
  }
  r.wer = static_cast<double>(r.errors()) / static_cast<double>(n);
  return r;
}

double corpus_wer(const std::vector<std::vector<std::string>>& references,
                  const std::vector<std::vector<std::string>>& hypotheses) {
  if (references.size() != hypotheses.size()) {
    fail(ErrorKind::kData, "corpus_wer: reference and hypothesis counts differ");
  }
  std::size_t words = 0, errors = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    errors += static_cast<std::size_t>(wer(references[i], hypotheses[i]).errors());
    words += references[i].size();
  }
  if (words == 0) fail(ErrorKind::kDomain, "corpus_wer: no reference words");
  return static_cast<double>(errors) / static_cast<double>(words);
}

// ---------------------------------------------------------------------------
// Files

void write_hypotheses(const std::filesystem::path& path, const std::vector<DecodeResult>& results) {
  std::string out;
  for (const auto& r : results) out += r.utt_id + "\t" + join(r.hypothesis, " ") + "\n";
  write_file_atomic(path, out);
}

namespace {
constexpr std::string_view kTraceMagic = "A2WA";
constexpr std::uint32_t kTraceVersion = 1;
}  // namespace

std::string encode_trace(const std::string& utt_id, const AttentionTrace& trace) {
  ByteWriter w;
  w.bytes(kTraceMagic);
  w.u32(kTraceVersion);
  w.str(utt_id);
  const std::size_t steps = trace.steps();
  const std::size_t frames = steps == 0 ? 0 : trace.alpha.cols();
  w.u32(static_cast<std::uint32_t>(steps));
  w.u32(static_cast<std::uint32_t>(frames));
  for (double v : trace.alpha.values()) w.f64(v);
  return w.buffer();
}

std::pair<std::string, AttentionTrace> decode_trace(std::string bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.expect_magic(kTraceMagic);
  const std::uint32_t version = r.u32();
  if (version != kTraceVersion) {
    fail(ErrorKind::kFormat, source + ": unsupported trace version " + std::to_string(version));
  }
  std::string id = r.str();
  const std::uint64_t steps = r.u32();
  const std::uint64_t frames = r.u32();
  if (steps * frames > r.remaining() / 8) fail(ErrorKind::kFormat, source + ": truncated trace");
  AttentionTrace trace;
  if (steps > 0 && frames > 0) {
    std::vector<double> data(static_cast<std::size_t>(steps * frames));
    for (double& v : data) v = r.f64();
    trace.alpha = Tensor({static_cast<std::size_t>(steps), static_cast<std::size_t>(frames)},
                         std::move(data));
  }
  r.expect_end();
  return {std::move(id), std::move(trace)};
}

void write_trace(const std::filesystem::path& path, const std::string& utt_id,
                 const AttentionTrace& trace) {
  write_file_atomic(path, encode_trace(utt_id, trace));
}

std::pair<std::string, AttentionTrace> read_trace(const std::filesystem::path& path) {
  return decode_trace(read_file(path), path.string());
}

}  // namespace a2w
