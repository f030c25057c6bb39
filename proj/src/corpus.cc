// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#include "a2w/corpus.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "a2w/binary_io.h"
#include "a2w/errors.h"

namespace a2w {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  add(kEosToken);
  add(kSosToken);
  add(kUnkToken);
}

Vocabulary::Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
  for (const auto& w : words) add(w);
}

int Vocabulary::add(std::string_view word) {
  if (word.empty()) fail(ErrorKind::kData, "empty vocabulary word");
  auto it = index_.find(std::string(word));
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(words_.size());
  words_.emplace_back(word);
  index_.emplace(words_.back(), id);
  return id;
}

int Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.count(std::string(word)) > 0;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) fail(ErrorKind::kDomain, "word index out of range: " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

const std::vector<Utterance>& Corpus::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  fail(ErrorKind::kUsage, "unknown split: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Preprocessing

std::vector<std::string> split_compounds(const std::vector<std::string>& transcript) {
  std::vector<std::string> out;
  out.reserve(transcript.size());
  for (const auto& token : transcript) {
    std::size_t start = 0;
    for (std::size_t i = 1; i + 1 < token.size(); ++i) {
      if (token[i] == '\'') {
        out.push_back(token.substr(start, i - start));
        start = i;
      }
    }
    out.push_back(token.substr(start));
  }
  return out;
}

std::vector<Utterance> filter_short(const std::vector<Utterance>& utterances, int min_words) {
  if (min_words < 1) fail(ErrorKind::kConfig, "filter_short: min_words must be >= 1");
  std::vector<Utterance> out;
  for (const auto& u : utterances) {
    if (static_cast<int>(u.words.size()) >= min_words) out.push_back(u);
  }
  return out;
}

int time_to_frame(double seconds) {
  if (!(seconds >= 0.0)) fail(ErrorKind::kDomain, "time_to_frame: negative or NaN time");
  // t / 0.01 is inexact in binary (0.29 / 0.01 == 28.999999999999996), so
  // quotients within rounding noise of an integer snap to it before flooring.
  const double frames = seconds / kFrameShiftSeconds;
  const double nearest = std::round(frames);
  if (std::abs(frames - nearest) < 1e-9 * std::max(1.0, nearest)) return static_cast<int>(nearest);
  return static_cast<int>(std::floor(frames));
}

// ---------------------------------------------------------------------------
// Generation

const std::vector<std::string>& builtin_lexicon() {
  static const std::vector<std::string> words = {
      "oh",     "i",      "see",   "that",   "'s",     "really", "neat",  "and",
      "so",     "we",     "did",   "you",    "know",   "they",   "'re",   "well",
      "just",   "tell",   "in",    "because", "goes",  "east",   "of",    "thing",
      "would",  "a",      "me",    "funny",  "she",    "go",     "couple", "obviously",
      "it",     "uh",     "yeah",  "right",  "think",  "like",   "mean",  "not",
      "have",   "do",     "about", "there",  "what",   "but",    "all",   "people",
      "lot",    "good",   "time",  "then",   "home",   "work",   "kids",  "year",
      "money",  "house",  "car",   "school", "never",  "always", "maybe", "sure",
  };
  return words;
}

void CorpusConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kConfig, "corpus config: " + what); };
  if (vocab_size < 1) bad("vocab_size must be >= 1");
  if (vocab_size + 3 < 4) bad("vocabulary needs at least 4 entries");
  if (vocab_size > static_cast<int>(builtin_lexicon().size())) {
    bad("vocab_size " + std::to_string(vocab_size) + " exceeds the " +
        std::to_string(builtin_lexicon().size()) + " available word templates");
  }
  if (num_utterances < 1) bad("num_utterances must be >= 1");
  if (min_words < 3 || max_words > 10 || min_words > max_words) {
    bad("words per utterance must satisfy 3 <= min_words <= max_words <= 10");
  }
  if (feature_dim < 1) bad("feature_dim must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) bad("noise must be >= 0");
  if (!(jitter >= 0.0 && jitter <= 0.3)) bad("jitter must lie in [0, 0.3]");
  if (min_duration < 8 || max_duration > 40 || min_duration > max_duration) {
    bad("template durations must satisfy 8 <= min_duration <= max_duration <= 40");
  }
  if (pause_frames < 0) bad("pause_frames must be >= 0");
  for (double f : {train_fraction, val_fraction, test_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) bad("split fractions must lie in [0, 1]");
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    bad("split fractions must sum to 1");
  }
}

namespace {

double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

std::string utterance_id(int n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "utt%05d", n);
  return buf;
}

}  // namespace

WordTemplate make_template(std::uint64_t corpus_seed, const std::string& word,
                           const CorpusConfig& config) {
  Rng rng = Rng::derive(corpus_seed, "template:" + word);
  const int length = static_cast<int>(rng.uniform_int(config.min_duration, config.max_duration));
  const auto len = static_cast<std::size_t>(length);
  const auto dim = static_cast<std::size_t>(config.feature_dim);
  Tensor proto({len, dim});
  for (std::size_t c = 0; c < dim; ++c) {
    double level = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      level += rng.normal();
      proto(t, c) = level;
    }
    double mean = 0.0;
    for (std::size_t t = 0; t < len; ++t) mean += proto(t, c);
    mean /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      proto(t, c) -= mean;
      var += proto(t, c) * proto(t, c);
    }
    const double sd = std::sqrt(var / static_cast<double>(len));
    const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
    for (std::size_t t = 0; t < len; ++t) proto(t, c) = to_float_precision(proto(t, c) * scale);
  }
  return WordTemplate{word, std::move(proto)};
}

Tensor warp_template(const Tensor& prototype, double factor) {
  const std::size_t len = prototype.rows();
  const std::size_t dim = prototype.cols();
  if (len == 0) fail(ErrorKind::kDimension, "warp_template: empty prototype");
  const auto out_len =
      static_cast<std::size_t>(std::max(1L, std::lround(static_cast<double>(len) * factor)));
  Tensor out({out_len, dim});
  for (std::size_t t = 0; t < out_len; ++t) {
    double pos = 0.0;
    if (out_len > 1) {
      pos = static_cast<double>(t) * static_cast<double>(len - 1) / static_cast<double>(out_len - 1);
    }
    const auto i0 = std::min(static_cast<std::size_t>(std::floor(pos)), len - 1);
    const double frac = pos - static_cast<double>(i0);
    for (std::size_t c = 0; c < dim; ++c) {
      if (frac == 0.0 || i0 + 1 >= len) {
        out(t, c) = prototype(i0, c);
      } else {
        out(t, c) = prototype(i0, c) * (1.0 - frac) + prototype(i0 + 1, c) * frac;
      }
    }
  }
  return out;
}

Corpus generate_corpus(const CorpusConfig& config, Rng& rng) {
  config.validate();
  Corpus corpus;
  std::vector<WordTemplate> templates;
  const auto& lexicon = builtin_lexicon();
  for (int v = 0; v < config.vocab_size; ++v) {
    const auto& word = lexicon[static_cast<std::size_t>(v)];
    corpus.vocab.add(word);
    templates.push_back(make_template(rng.seed(), word, config));
  }

  const auto dim = static_cast<std::size_t>(config.feature_dim);
  std::vector<Utterance> all;
  all.reserve(static_cast<std::size_t>(config.num_utterances));
  for (int n = 0; n < config.num_utterances; ++n) {
    const auto num_words = rng.uniform_int(config.min_words, config.max_words);
    std::vector<std::size_t> picks;
    for (std::int64_t k = 0; k < num_words; ++k) {
      picks.push_back(static_cast<std::size_t>(rng.uniform_int(0, config.vocab_size - 1)));
    }

    std::vector<double> frames;
    std::vector<WordAlignment> alignments;
    std::vector<std::string> words;
    int cursor = 0;
    for (std::size_t k = 0; k < picks.size(); ++k) {
      if (k > 0 && config.pause_frames > 0) {
        for (int p = 0; p < config.pause_frames; ++p) {
          for (std::size_t c = 0; c < dim; ++c) {
            frames.push_back(config.noise > 0.0 ? to_float_precision(rng.normal(0.0, config.noise)) : 0.0);
          }
        }
        cursor += config.pause_frames;
      }
      const WordTemplate& tpl = templates[picks[k]];
      const double factor = rng.uniform(1.0 - config.jitter, 1.0 + config.jitter);
      Tensor real = warp_template(tpl.prototype, factor);
      for (double& v : real.values()) {
        if (config.noise > 0.0) v += rng.normal(0.0, config.noise);
        frames.push_back(to_float_precision(v));
      }
      const int frames_here = static_cast<int>(real.rows());
      alignments.push_back({tpl.word, cursor, cursor + frames_here - 1});
      words.push_back(tpl.word);
      cursor += frames_here;
    }
    Utterance utt;
    utt.id = utterance_id(n);
    utt.features = Tensor({static_cast<std::size_t>(cursor), dim}, std::move(frames));
    utt.words = std::move(words);
    utt.alignments = std::move(alignments);
    all.push_back(std::move(utt));
  }
  all = filter_short(all, 3);

  const auto total = static_cast<double>(all.size());
  const auto n_val = static_cast<std::size_t>(std::floor(total * config.val_fraction + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(total * config.test_fraction + 1e-9));
  const std::size_t n_train = all.size() - n_val - n_test;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i < n_train) {
      corpus.train.push_back(std::move(all[i]));
    } else if (i < n_train + n_val) {
      corpus.val.push_back(std::move(all[i]));
    } else {
      corpus.test.push_back(std::move(all[i]));
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Feature files

namespace {
constexpr std::string_view kFeatureMagic = "A2WF";
constexpr std::uint32_t kFeatureVersion = 1;
}  // namespace

std::string encode_features(const Tensor& features) {
  if (features.rank() != 2) fail(ErrorKind::kDimension, "features must be a [T x d] matrix");
  const std::size_t t = features.shape()[0], d = features.shape()[1];
  if (t > UINT32_MAX || d > UINT32_MAX) fail(ErrorKind::kFormat, "feature shape overflows u32");
  ByteWriter w;
  w.bytes(kFeatureMagic);
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(t));
  w.u32(static_cast<std::uint32_t>(d));
  for (double v : features.values()) w.f32(static_cast<float>(v));
  return w.buffer();
}

Tensor decode_features(std::string bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.expect_magic(kFeatureMagic);
  const std::uint32_t version = r.u32();
  if (version != kFeatureVersion) {
    fail(ErrorKind::kFormat, source + ": unsupported feature version " + std::to_string(version));
  }
  const std::uint64_t t = r.u32();
  const std::uint64_t d = r.u32();
  if (t == 0 || d == 0) fail(ErrorKind::kFormat, source + ": zero extent in feature header");
  if (t * d > r.remaining() / 4) {
    fail(ErrorKind::kFormat, source + ": truncated feature payload (shape " + std::to_string(t) +
                                 "x" + std::to_string(d) + ")");
  }
  std::vector<double> data(static_cast<std::size_t>(t * d));
  for (double& v : data) v = static_cast<double>(r.f32());
  r.expect_end();
  return Tensor({static_cast<std::size_t>(t), static_cast<std::size_t>(d)}, std::move(data));
}

void write_features(const fs::path& path, const Tensor& features) {
  write_file_atomic(path, encode_features(features));
}

Tensor read_features(const fs::path& path) { return decode_features(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Text files

namespace {

int parse_int(const std::string& text, const std::string& where) {
  int v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    fail(ErrorKind::kFormat, where + ": expected an integer, got \"" + text + "\"");
  }
  return v;
}

std::string location(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line + 1);
}

}  // namespace

void write_vocabulary(const fs::path& path, const Vocabulary& vocab) {
  std::string out;
  for (const auto& w : vocab.words()) out += w + "\n";
  write_file_atomic(path, out);
}

Vocabulary read_vocabulary(const fs::path& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.size() < 3 || lines[0] != kEosToken || lines[1] != kSosToken || lines[2] != kUnkToken) {
    fail(ErrorKind::kFormat, path.string() + ": lines 0-2 must be #eos#, #sos#, #unk#");
  }
  Vocabulary vocab;
  for (std::size_t i = 3; i < lines.size(); ++i) {
    if (vocab.contains(lines[i])) fail(ErrorKind::kFormat, location(path, i) + ": duplicate word");
    vocab.add(lines[i]);
  }
  return vocab;
}

void write_transcripts(const fs::path& path,
                       const std::vector<std::pair<std::string, std::vector<std::string>>>& rows) {
  std::string out;
  for (const auto& [id, words] : rows) out += id + "\t" + join(words, " ") + "\n";
  write_file_atomic(path, out);
}

TranscriptMap read_transcripts(const fs::path& path) {
  TranscriptMap out;
  std::vector<std::string> lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto tab = lines[i].find('\t');
    if (tab == std::string::npos) fail(ErrorKind::kFormat, location(path, i) + ": missing TAB");
    std::string id = lines[i].substr(0, tab);
    if (!out.emplace(id, split_whitespace(std::string_view(lines[i]).substr(tab + 1))).second) {
      fail(ErrorKind::kFormat, location(path, i) + ": duplicate utterance id " + id);
    }
  }
  return out;
}

void write_alignments(const fs::path& path, const std::vector<Utterance>& utterances) {
  std::string out;
  for (const auto& u : utterances) {
    if (!u.alignments) continue;
    for (const auto& a : *u.alignments) {
      out += u.id + "\t" + a.word + "\t" + std::to_string(a.start_frame) + "\t" +
             std::to_string(a.end_frame) + "\n";
    }
  }
  write_file_atomic(path, out);
}

AlignmentMap read_alignments(const fs::path& path) {
  AlignmentMap out;
  std::vector<std::string> lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::vector<std::string> f = split(lines[i], '\t');
    if (f.size() != 4) fail(ErrorKind::kFormat, location(path, i) + ": expected 4 TAB-separated fields");
    WordAlignment a{f[1], parse_int(f[2], location(path, i)), parse_int(f[3], location(path, i))};
    if (a.start_frame < 0 || a.start_frame > a.end_frame) {
      fail(ErrorKind::kData, location(path, i) + ": invalid frame range");
    }
    auto& list = out[f[0]];
    if (!list.empty() && list.back().end_frame >= a.start_frame) {
      fail(ErrorKind::kData, location(path, i) + ": overlapping or unordered alignment");
    }
    list.push_back(std::move(a));
  }
  return out;
}

namespace {

constexpr const char* kSplitNames[] = {"train", "val", "test"};

}  // namespace

void write_corpus(const fs::path& dir, const Corpus& corpus) {
  std::error_code ec;
  fs::create_directories(dir / "feats", ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + (dir / "feats").string() + ": " + ec.message());

  write_vocabulary(dir / "vocab.txt", corpus.vocab);
  std::vector<std::pair<std::string, std::vector<std::string>>> transcripts;
  std::vector<Utterance> everything;
  for (const char* name : kSplitNames) {
    std::string manifest;
    for (const auto& u : corpus.split(name)) {
      const std::string rel = "feats/" + u.id + ".a2wf";
      write_features(dir / rel, u.features);
      manifest += u.id + "\t" + rel + "\n";
      transcripts.emplace_back(u.id, u.words);
    }
    write_file_atomic(dir / (std::string(name) + ".lst"), manifest);
  }
  write_transcripts(dir / "transcripts.txt", transcripts);
  for (const char* name : kSplitNames) {
    for (const auto& u : corpus.split(name)) everything.push_back(u);
  }
  write_alignments(dir / "alignments.txt", everything);
}

std::vector<Utterance> read_split(const fs::path& dir, std::string_view split_name,
                                  const Vocabulary* vocab_check) {
  const fs::path manifest = dir / (std::string(split_name) + ".lst");
  if (!fs::exists(manifest)) fail(ErrorKind::kIo, "missing manifest " + manifest.string());
  TranscriptMap transcripts = read_transcripts(dir / "transcripts.txt");
  AlignmentMap alignments;
  if (fs::exists(dir / "alignments.txt")) alignments = read_alignments(dir / "alignments.txt");

  std::vector<Utterance> out;
  std::vector<std::string> lines = read_lines(manifest);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::vector<std::string> f = split(lines[i], '\t');
    if (f.size() != 2) fail(ErrorKind::kFormat, location(manifest, i) + ": expected utt_id<TAB>path");
    Utterance u;
    u.id = f[0];
    u.features = read_features(dir / f[1]);
    auto tr = transcripts.find(u.id);
    if (tr == transcripts.end()) fail(ErrorKind::kData, "no transcript for " + u.id);
    u.words = tr->second;
    if (vocab_check) {
      for (const auto& w : u.words) {
        if (!vocab_check->contains(w)) fail(ErrorKind::kData, u.id + ": word not in vocabulary: " + w);
      }
    }
    auto al = alignments.find(u.id);
    if (al != alignments.end()) {
      if (al->second.size() != u.words.size()) {
        fail(ErrorKind::kData, u.id + ": alignment count differs from transcript length");
      }
      if (al->second.back().end_frame >= static_cast<int>(u.num_frames())) {
        fail(ErrorKind::kData, u.id + ": alignment extends past the last frame");
      }
      u.alignments = al->second;
    }
    out.push_back(std::move(u));
  }
  return out;
}

Corpus read_corpus(const fs::path& dir) {
  Corpus corpus;
  corpus.vocab = read_vocabulary(dir / "vocab.txt");
  corpus.train = read_split(dir, "train", &corpus.vocab);
  corpus.val = read_split(dir, "val", &corpus.vocab);
  corpus.test = read_split(dir, "test", &corpus.vocab);
  return corpus;
}

}  // namespace a2w
