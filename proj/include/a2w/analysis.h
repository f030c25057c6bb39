// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors
//
// Word segmentation from attention traces: the frame with the largest
// attention weight for each emitted word is taken as that word's predicted
// position and compared with the forced alignment.

#ifndef A2W_ANALYSIS_H_
#define A2W_ANALYSIS_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "a2w/corpus.h"
#include "a2w/decoding.h"
#include "a2w/model.h"

namespace a2w {

// How a reduced frame r maps back to an input frame.
enum class FrameMapping { kWindowStart, kWindowEnd };  // 4r, 4r + 3
// Which ground-truth frame a prediction is compared with.
enum class ComparisonPoint { kWordEnd, kWordStart };

struct WordBoundary {
  std::string word;
  int reduced_frame = 0;
  int input_frame = 0;
  double max_prob = 0.0;
};

struct BoundaryPrediction {
  std::string utt_id;
  std::vector<WordBoundary> words;
};

int input_frame_for(int reduced_frame, FrameMapping mapping = FrameMapping::kWindowStart);

// Uses the first n_words rows of the trace; the trailing #eos# row is not a
// word. `words`, when non-empty, must have n_words entries and labels the
// result.
BoundaryPrediction predict_boundaries(const AttentionTrace& trace, std::size_t n_words,
                                      const std::vector<std::string>& words = {},
                                      FrameMapping mapping = FrameMapping::kWindowStart);

// predicted[k] - groundtruth[k]; positive means the prediction is late.
std::vector<int> frame_errors(const std::vector<int>& predicted, const std::vector<int>& groundtruth);

// Ground-truth frames of an alignment at the chosen comparison point.
std::vector<int> reference_frames(const std::vector<WordAlignment>& alignment,
                                  ComparisonPoint point = ComparisonPoint::kWordEnd);

// Errors for one utterance. Words of the prediction and alignment must
// agree one to one.
std::vector<int> boundary_errors(const BoundaryPrediction& prediction,
                                 const std::vector<WordAlignment>& alignment,
                                 ComparisonPoint point = ComparisonPoint::kWordEnd);

struct ZeroWerSelection {
  std::vector<std::string> utt_ids;
  double fraction = 0.0;  // selected / decoded; 0 when nothing was decoded
};

ZeroWerSelection select_zero_wer(const std::vector<DecodeResult>& decodes,
                                 const TranscriptMap& references);
// Same selection from hypothesis and reference maps (decode directories).
ZeroWerSelection select_zero_wer(const TranscriptMap& hypotheses, const TranscriptMap& references);

struct UtteranceErrors {
  std::string utt_id;
  std::string split;  // "train", "val" or "test"
  std::vector<int> errors;
};

struct ErrorStats {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t words = 0;
};

struct SplitReport {
  ErrorStats all_words;
  ErrorStats without_last;
  std::size_t utterances = 0;
  double zero_wer_fraction = 0.0;  // filled in by the caller when known
};

struct FrameErrorReport {
  std::map<std::string, SplitReport> splits;
};

ErrorStats error_stats(const std::vector<int>& errors);

// Flat mean and population std over every word per split, once with all
// words and once without each utterance's final word. A one-word utterance
// contributes nothing to the second set.
FrameErrorReport aggregate_report(const std::vector<UtteranceErrors>& utterances);

// Text table: rows W/o Last Word Mean/Std and All Words Mean/Std, columns
// Train/Val/Test ("-" for absent splits).
std::string format_report_table(const FrameErrorReport& report);
// key<TAB>value lines, e.g. "val.all_words.mean".
std::string format_report_kv(const FrameErrorReport& report);

// utt_id<TAB>word<TAB>reduced_frame<TAB>input_frame<TAB>max_prob
void write_boundaries(const std::filesystem::path& path,
                      const std::vector<BoundaryPrediction>& predictions);
std::vector<BoundaryPrediction> read_boundaries(const std::filesystem::path& path);

}  // namespace a2w

#endif  // A2W_ANALYSIS_H_
