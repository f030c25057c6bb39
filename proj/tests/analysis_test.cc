// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>

#include "doctest.h"

#include "a2w/analysis.h"
#include "a2w/errors.h"

using namespace a2w;
namespace fs = std::filesystem;

namespace {

bool throws_kind(ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

AttentionTrace trace_of(std::initializer_list<std::initializer_list<double>> rows) {
  AttentionTrace t;
  t.alpha = Tensor::matrix(rows);
  return t;
}

AttentionTrace one_hot_rows(const std::vector<std::size_t>& peaks, std::size_t frames) {
  AttentionTrace t;
  t.alpha = Tensor({peaks.size(), frames});
  for (std::size_t k = 0; k < peaks.size(); ++k) t.alpha(k, peaks[k]) = 1.0;
  return t;
}

DecodeResult decoded(const std::string& id, std::vector<std::string> words) {
  DecodeResult d;
  d.utt_id = id;
  d.hypothesis = std::move(words);
  return d;
}

const std::vector<int> kExampleErrors{0, 3, -1, 2, -8};

}  // namespace

TEST_CASE("boundary prediction examples") {
  const BoundaryPrediction a = predict_boundaries(trace_of({{0.1, 0.7, 0.2}}), 1);
  REQUIRE(a.words.size() == 1);
  CHECK(a.words[0].reduced_frame == 1);
  CHECK(a.words[0].input_frame == 4);
  CHECK(a.words[0].max_prob == 0.7);

  const BoundaryPrediction u = predict_boundaries(trace_of({{0.2, 0.2, 0.2, 0.2, 0.2}}), 1);
  CHECK(u.words[0].reduced_frame == 0);
  CHECK(u.words[0].input_frame == 0);

  const BoundaryPrediction h = predict_boundaries(one_hot_rows({2, 5, 9}, 12), 3, {"x", "y", "z"});
  REQUIRE(h.words.size() == 3);
  CHECK(h.words[0].input_frame == 8);
  CHECK(h.words[1].input_frame == 20);
  CHECK(h.words[2].input_frame == 36);
  CHECK(h.words[2].word == "z");
}

TEST_CASE("boundary prediction skips the trailing eos row and validates counts") {
  // Two words plus the eos step.
  const BoundaryPrediction p = predict_boundaries(one_hot_rows({1, 3, 0}, 4), 2);
  CHECK(p.words.size() == 2);
  CHECK(throws_kind(ErrorKind::kDomain, [] { predict_boundaries(one_hot_rows({1}, 4), 2); }));
  CHECK(throws_kind(ErrorKind::kDimension,
                    [] { predict_boundaries(one_hot_rows({1, 2}, 4), 2, {"only"}); }));
}

TEST_CASE("input frame is always a multiple of four under the default mapping") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto frames = static_cast<std::size_t>(rng.uniform_int(1, 30));
    AttentionTrace t;
    t.alpha = Tensor({3, frames});
    for (double& v : t.alpha.values()) v = rng.uniform();
    for (const WordBoundary& w : predict_boundaries(t, 3).words) {
      CHECK(w.input_frame == 4 * w.reduced_frame);
      CHECK(w.reduced_frame < static_cast<int>(frames));
    }
  }
  CHECK(input_frame_for(5, FrameMapping::kWindowEnd) == 23);
}

TEST_CASE("frame errors on the worked example") {
  CHECK(frame_errors({988, 1008, 1012, 1044, 1092}, {988, 1005, 1013, 1042, 1100}) == kExampleErrors);
  CHECK(frame_errors({5, 6}, {5, 6}) == std::vector<int>{0, 0});
  CHECK(throws_kind(ErrorKind::kDimension, [] { frame_errors({1}, {1, 2}); }));
}

TEST_CASE("frame errors are anti-symmetric") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> a, b;
    const auto n = rng.uniform_int(0, 10);
    for (std::int64_t i = 0; i < n; ++i) {
      a.push_back(static_cast<int>(rng.uniform_int(0, 2000)));
      b.push_back(static_cast<int>(rng.uniform_int(0, 2000)));
    }
    const auto ab = frame_errors(a, b), ba = frame_errors(b, a);
    for (std::size_t i = 0; i < ab.size(); ++i) CHECK(ab[i] == -ba[i]);
  }
}

TEST_CASE("reference frames and per-utterance errors") {
  const std::vector<WordAlignment> al{{"a", 0, 9}, {"b", 10, 19}};
  CHECK(reference_frames(al) == std::vector<int>{9, 19});
  CHECK(reference_frames(al, ComparisonPoint::kWordStart) == std::vector<int>{0, 10});
  const BoundaryPrediction p = predict_boundaries(one_hot_rows({2, 5}, 8), 2, {"a", "b"});
  CHECK(boundary_errors(p, al) == std::vector<int>{-1, 1});
  const BoundaryPrediction wrong = predict_boundaries(one_hot_rows({2, 5}, 8), 2, {"a", "c"});
  CHECK(throws_kind(ErrorKind::kData, [&] { boundary_errors(wrong, al); }));
}

TEST_CASE("zero-wer selection") {
  TranscriptMap refs;
  std::vector<DecodeResult> perfect, none, mixed;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "u" + std::to_string(i);
    refs[id] = {"a", "b"};
    perfect.push_back(decoded(id, {"a", "b"}));
    none.push_back(decoded(id, {"a"}));
    mixed.push_back(decoded(id, i % 5 < 2 ? std::vector<std::string>{"a", "b"} : std::vector<std::string>{"b"}));
  }
  const ZeroWerSelection all = select_zero_wer(perfect, refs);
  CHECK(all.utt_ids.size() == 10);
  CHECK(all.fraction == 1.0);
  const ZeroWerSelection empty = select_zero_wer(none, refs);
  CHECK(empty.utt_ids.empty());
  CHECK(empty.fraction == 0.0);
  const ZeroWerSelection some = select_zero_wer(mixed, refs);
  CHECK(some.utt_ids == std::vector<std::string>{"u0", "u1", "u5", "u6"});
  CHECK(some.fraction == doctest::Approx(0.4));

  // Selecting again from the selection keeps it unchanged.
  std::vector<DecodeResult> again;
  for (const auto& d : mixed) {
    if (std::find(some.utt_ids.begin(), some.utt_ids.end(), d.utt_id) != some.utt_ids.end()) again.push_back(d);
  }
  CHECK(select_zero_wer(again, refs).utt_ids == some.utt_ids);

  CHECK(select_zero_wer(std::vector<DecodeResult>{}, refs).fraction == 0.0);
  CHECK(throws_kind(ErrorKind::kData, [&] { select_zero_wer({decoded("zz", {"a"})}, refs); }));

  TranscriptMap hyps;
  for (const auto& d : mixed) hyps[d.utt_id] = d.hypothesis;
  CHECK(select_zero_wer(hyps, refs).utt_ids == some.utt_ids);
}

TEST_CASE("aggregate report on the worked example") {
  const FrameErrorReport r = aggregate_report({{"u", "val", kExampleErrors}});
  const SplitReport& s = r.splits.at("val");
  CHECK(s.all_words.mean == doctest::Approx(-0.8));
  CHECK(s.all_words.std == doctest::Approx(3.867816).epsilon(1e-6));
  CHECK(s.all_words.words == 5);
  CHECK(s.without_last.mean == doctest::Approx(1.0));
  CHECK(s.without_last.std == doctest::Approx(1.581139).epsilon(1e-6));
  CHECK(s.without_last.words == 4);
  CHECK(s.utterances == 1);
}

TEST_CASE("aggregate report small cases") {
  const FrameErrorReport zeros = aggregate_report({{"a", "train", {0, 0, 0}}});
  CHECK(zeros.splits.at("train").all_words.mean == 0.0);
  CHECK(zeros.splits.at("train").all_words.std == 0.0);
  CHECK(zeros.splits.at("train").without_last.std == 0.0);

  const FrameErrorReport two = aggregate_report({{"a", "test", {1, 1}}, {"b", "test", {-1, -1}}});
  CHECK(two.splits.at("test").all_words.mean == 0.0);
  CHECK(two.splits.at("test").all_words.std == doctest::Approx(1.0));

  CHECK(throws_kind(ErrorKind::kDomain, [] { aggregate_report({}); }));
  CHECK(throws_kind(ErrorKind::kDomain, [] { aggregate_report({{"a", "val", {}}}); }));
  CHECK(std::isnan(error_stats({}).mean));
}

TEST_CASE("without-last count is all-words count minus utterances") {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<UtteranceErrors> utts;
    const auto n = rng.uniform_int(1, 8);
    for (std::int64_t i = 0; i < n; ++i) {
      UtteranceErrors u{"u" + std::to_string(i), i % 2 ? "val" : "train", {}};
      const auto words = rng.uniform_int(1, 6);
      for (std::int64_t k = 0; k < words; ++k) u.errors.push_back(static_cast<int>(rng.uniform_int(-20, 20)));
      utts.push_back(u);
    }
    for (const auto& [split, s] : aggregate_report(utts).splits) {
      CHECK(s.without_last.words == s.all_words.words - s.utterances);
    }
  }
}

TEST_CASE("inflated final-word errors only widen the all-words spread") {
  std::vector<UtteranceErrors> utts;
  for (int i = 0; i < 6; ++i) {
    utts.push_back({"u" + std::to_string(i), "val", {1, -1, 2, 0, i % 2 ? 40 : -35}});
  }
  const SplitReport s = aggregate_report(utts).splits.at("val");
  CHECK(s.without_last.std <= s.all_words.std);
}

TEST_CASE("report formats") {
  const FrameErrorReport r = aggregate_report({{"u", "val", kExampleErrors}});
  const std::string table = format_report_table(r);
  CHECK(std::count(table.begin(), table.end(), '\n') == 5);  // header + 4 rows
  CHECK(table.find("W/o Last Word") != std::string::npos);
  CHECK(table.find("-0.80") != std::string::npos);
  const std::string kv = format_report_kv(r);
  CHECK(kv.find("val.all_words.mean\t") != std::string::npos);
  CHECK(kv.find("val.without_last.words\t4\n") != std::string::npos);
}

TEST_CASE("boundary file roundtrip") {
  const fs::path dir = fs::temp_directory_path() / "a2w_analysis_test";
  fs::create_directories(dir);
  BoundaryPrediction p = predict_boundaries(one_hot_rows({2, 5}, 8), 2, {"a", "b"});
  p.utt_id = "utt00007";
  p.words[1].max_prob = 0.123456789012345;
  write_boundaries(dir / "b.txt", {p});
  const auto back = read_boundaries(dir / "b.txt");
  REQUIRE(back.size() == 1);
  CHECK(back[0].utt_id == "utt00007");
  REQUIRE(back[0].words.size() == 2);
  CHECK(back[0].words[1].word == "b");
  CHECK(back[0].words[1].input_frame == 20);
  CHECK(back[0].words[1].max_prob == p.words[1].max_prob);
}
