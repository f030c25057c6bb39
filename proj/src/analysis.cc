// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#include "a2w/analysis.h"

#include <charconv>
#include <cmath>

#include "a2w/binary_io.h"
#include "a2w/errors.h"

namespace a2w {

int input_frame_for(int reduced_frame, FrameMapping mapping) {
  const int base = kReductionFactor * reduced_frame;
  return mapping == FrameMapping::kWindowStart ? base : base + kReductionFactor - 1;
}

BoundaryPrediction predict_boundaries(const AttentionTrace& trace, std::size_t n_words,
                                      const std::vector<std::string>& words, FrameMapping mapping) {
  if (trace.steps() < n_words) {
    fail(ErrorKind::kDomain, "trace has " + std::to_string(trace.steps()) + " rows, need " +
                                 std::to_string(n_words));
  }
  if (!words.empty() && words.size() != n_words) {
    fail(ErrorKind::kDimension, "predict_boundaries: word label count differs from n_words");
  }
  BoundaryPrediction out;
  for (std::size_t k = 0; k < n_words; ++k) {
    auto row = trace.row(k);
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
      if (row[i] > row[best]) best = i;
    }
    WordBoundary b;
    if (!words.empty()) b.word = words[k];
    b.reduced_frame = static_cast<int>(best);
    b.input_frame = input_frame_for(b.reduced_frame, mapping);
    b.max_prob = row[best];
    out.words.push_back(std::move(b));
  }
  return out;
}

std::vector<int> frame_errors(const std::vector<int>& predicted, const std::vector<int>& groundtruth) {
  if (predicted.size() != groundtruth.size()) {
    fail(ErrorKind::kDimension, "frame_errors: " + std::to_string(predicted.size()) +
                                    " predictions vs " + std::to_string(groundtruth.size()) +
                                    " reference frames");
  }
  std::vector<int> out(predicted.size());
  for (std::size_t k = 0; k < predicted.size(); ++k) out[k] = predicted[k] - groundtruth[k];
  return out;
}

std::vector<int> reference_frames(const std::vector<WordAlignment>& alignment, ComparisonPoint point) {
  std::vector<int> out;
  out.reserve(alignment.size());
  for (const auto& a : alignment) {
    out.push_back(point == ComparisonPoint::kWordEnd ? a.end_frame : a.start_frame);
  }
  return out;
}

std::vector<int> boundary_errors(const BoundaryPrediction& prediction,
                                 const std::vector<WordAlignment>& alignment, ComparisonPoint point) {
  if (prediction.words.size() != alignment.size()) {
    fail(ErrorKind::kData, prediction.utt_id + ": " + std::to_string(prediction.words.size()) +
                               " predicted words vs " + std::to_string(alignment.size()) +
                               " aligned words");
  }
  std::vector<int> predicted;
  for (std::size_t k = 0; k < alignment.size(); ++k) {
    const auto& w = prediction.words[k].word;
    if (!w.empty() && w != alignment[k].word) {
      fail(ErrorKind::kData, prediction.utt_id + ": word " + std::to_string(k) + " is '" + w +
                                 "' but the alignment has '" + alignment[k].word + "'");
    }
    predicted.push_back(prediction.words[k].input_frame);
  }
  return frame_errors(predicted, reference_frames(alignment, point));
}

ZeroWerSelection select_zero_wer(const std::vector<DecodeResult>& decodes,
                                 const TranscriptMap& references) {
  ZeroWerSelection out;
  for (const auto& d : decodes) {
    auto ref = references.find(d.utt_id);
    if (ref == references.end()) fail(ErrorKind::kData, "no reference for " + d.utt_id);
    if (wer(ref->second, d.hypothesis).errors() == 0) out.utt_ids.push_back(d.utt_id);
  }
  if (!decodes.empty()) {
    out.fraction = static_cast<double>(out.utt_ids.size()) / static_cast<double>(decodes.size());
  }
  return out;
}

ZeroWerSelection select_zero_wer(const TranscriptMap& hypotheses, const TranscriptMap& references) {
  std::vector<DecodeResult> decodes;
  for (const auto& [id, words] : hypotheses) {
    DecodeResult d;
    d.utt_id = id;
    d.hypothesis = words;
    decodes.push_back(std::move(d));
  }
  return select_zero_wer(decodes, references);
}

ErrorStats error_stats(const std::vector<int>& errors) {
  ErrorStats s;
  s.words = errors.size();
  if (errors.empty()) {
    s.mean = s.std = std::nan("");
    return s;
  }
  double sum = 0.0;
  for (int e : errors) sum += e;
  s.mean = sum / static_cast<double>(errors.size());
  double sq = 0.0;
  for (int e : errors) sq += (e - s.mean) * (e - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(errors.size()));
  return s;
}

FrameErrorReport aggregate_report(const std::vector<UtteranceErrors>& utterances) {
  if (utterances.empty()) fail(ErrorKind::kDomain, "aggregate_report: no utterances");
  std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> pooled;
  std::map<std::string, std::size_t> counts;
  for (const auto& u : utterances) {
    if (u.errors.empty()) fail(ErrorKind::kDomain, u.utt_id + ": utterance contributes no words");
    auto& [all, trimmed] = pooled[u.split];
    all.insert(all.end(), u.errors.begin(), u.errors.end());
    trimmed.insert(trimmed.end(), u.errors.begin(), u.errors.end() - 1);
    ++counts[u.split];
  }
  FrameErrorReport report;
  for (const auto& [split, lists] : pooled) {
    SplitReport& r = report.splits[split];
    r.all_words = error_stats(lists.first);
    r.without_last = error_stats(lists.second);
    r.utterances = counts[split];
  }
  return report;
}

namespace {

const std::pair<const char*, const char*> kColumns[] = {
    {"train", "Train"}, {"val", "Val"}, {"test", "Test"}};

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "-";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string format_report_table(const FrameErrorReport& report) {
  std::string out = "                      ";
  for (const auto& [key, label] : kColumns) out += pad(label, 9);
  out += "\n";
  auto row = [&](const char* label, auto pick) {
    std::string line = label;
    line += std::string(22 - line.size(), ' ');
    for (const auto& [key, name] : kColumns) {
      auto it = report.splits.find(key);
      line += pad(it == report.splits.end() ? "-" : fixed(pick(it->second), 2), 9);
    }
    out += line + "\n";
  };
  row("W/o Last Word   Mean", [](const SplitReport& r) { return r.without_last.mean; });
  row("                Std", [](const SplitReport& r) { return r.without_last.std; });
  row("All Words       Mean", [](const SplitReport& r) { return r.all_words.mean; });
  row("                Std", [](const SplitReport& r) { return r.all_words.std; });
  return out;
}

std::string format_report_kv(const FrameErrorReport& report) {
  std::string out;
  auto put = [&](const std::string& key, const std::string& value) {
    out += key + "\t" + value + "\n";
  };
  for (const auto& [split, r] : report.splits) {
    for (const auto& [name, s] : {std::pair<const char*, const ErrorStats&>{"all_words", r.all_words},
                                  {"without_last", r.without_last}}) {
      put(split + "." + name + ".mean", format_double(s.mean));
      put(split + "." + name + ".std", format_double(s.std));
      put(split + "." + name + ".words", std::to_string(s.words));
    }
    put(split + ".utterances", std::to_string(r.utterances));
    put(split + ".zero_wer_fraction", format_double(r.zero_wer_fraction));
  }
  return out;
}

void write_boundaries(const std::filesystem::path& path,
                      const std::vector<BoundaryPrediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) {
    for (const auto& w : p.words) {
      out += p.utt_id + "\t" + w.word + "\t" + std::to_string(w.reduced_frame) + "\t" +
             std::to_string(w.input_frame) + "\t" + format_double(w.max_prob) + "\n";
    }
  }
  write_file_atomic(path, out);
}

std::vector<BoundaryPrediction> read_boundaries(const std::filesystem::path& path) {
  std::vector<BoundaryPrediction> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto f = split(lines[i], '\t');
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    if (f.size() != 5) fail(ErrorKind::kFormat, where + ": expected 5 fields");
    WordBoundary w;
    w.word = f[1];
    try {
      std::size_t used = 0;
      w.reduced_frame = std::stoi(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument(f[2]);
      w.input_frame = std::stoi(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument(f[3]);
      w.max_prob = std::stod(f[4], &used);
      if (used != f[4].size()) throw std::invalid_argument(f[4]);
    } catch (const std::logic_error&) {
      fail(ErrorKind::kFormat, where + ": malformed number");
    }
    if (out.empty() || out.back().utt_id != f[0]) out.push_back({f[0], {}});
    out.back().words.push_back(std::move(w));
  }
  return out;
}

}  // namespace a2w
