// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#include "a2w/run_config.h"

#include <charconv>
#include <functional>
#include <map>

#include "a2w/binary_io.h"
#include "a2w/errors.h"

namespace a2w {
namespace {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  fail(ErrorKind::kConfig, "config key " + key + ": '" + value + "' is not " + want);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) bad_value(key, value, "a valid number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "a boolean");
}

// Member-pointer accessors for numeric fields nested one level deep.
template <class Outer, class T>
Field num(Outer RunConfig::*outer, T Outer::*member) {
  return {[=](RunConfig& c, const std::string& v) { (c.*outer).*member = parse_number<T>("", v); },
          [=](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double((c.*outer).*member);
            else return std::to_string((c.*outer).*member);
          }};
}

template <class T>
Field top(T RunConfig::*member) {
  return {[=](RunConfig& c, const std::string& v) { c.*member = parse_number<T>("", v); },
          [=](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    using R = RunConfig;
    t["corpus.seed"] = top(&R::corpus_seed);
    t["corpus.vocab_size"] = num(&R::corpus, &CorpusConfig::vocab_size);
    t["corpus.num_utterances"] = num(&R::corpus, &CorpusConfig::num_utterances);
    t["corpus.min_words"] = num(&R::corpus, &CorpusConfig::min_words);
    t["corpus.max_words"] = num(&R::corpus, &CorpusConfig::max_words);
    t["corpus.feature_dim"] = num(&R::corpus, &CorpusConfig::feature_dim);
    t["corpus.noise"] = num(&R::corpus, &CorpusConfig::noise);
    t["corpus.jitter"] = num(&R::corpus, &CorpusConfig::jitter);
    t["corpus.min_duration"] = num(&R::corpus, &CorpusConfig::min_duration);
    t["corpus.max_duration"] = num(&R::corpus, &CorpusConfig::max_duration);
    t["corpus.pause_frames"] = num(&R::corpus, &CorpusConfig::pause_frames);
    t["corpus.train_fraction"] = num(&R::corpus, &CorpusConfig::train_fraction);
    t["corpus.val_fraction"] = num(&R::corpus, &CorpusConfig::val_fraction);
    t["corpus.test_fraction"] = num(&R::corpus, &CorpusConfig::test_fraction);

    t["model.hidden"] = num(&R::model, &ModelConfig::hidden);
    t["model.embed_dim"] = num(&R::model, &ModelConfig::embed_dim);
    t["model.att_channels"] = num(&R::model, &ModelConfig::att_channels);
    t["model.att_width"] = num(&R::model, &ModelConfig::att_width);
    t["model.att_dim"] = num(&R::model, &ModelConfig::att_dim);
    t["model.decoder_units"] = num(&R::model, &ModelConfig::decoder_units);

    t["train.epochs"] = num(&R::train, &TrainConfig::epochs);
    t["train.learning_rate"] = num(&R::train, &TrainConfig::learning_rate);
    t["train.beta1"] = num(&R::train, &TrainConfig::beta1);
    t["train.beta2"] = num(&R::train, &TrainConfig::beta2);
    t["train.epsilon"] = num(&R::train, &TrainConfig::epsilon);
    t["train.grad_clip_norm"] = num(&R::train, &TrainConfig::grad_clip_norm);
    t["train.init_seed"] = num(&R::train, &TrainConfig::init_seed);
    t["train.shuffle_seed"] = num(&R::train, &TrainConfig::shuffle_seed);
    t["train.init_scale"] = num(&R::train, &TrainConfig::init_scale);
    t["train.log_every"] = num(&R::train, &TrainConfig::log_every);

    t["decode.beam"] = top(&R::beam);
    t["decode.max_len"] = top(&R::max_len);

    t["analysis.compare"] = {
        [](R& c, const std::string& v) {
          if (v == "end") c.compare = ComparisonPoint::kWordEnd;
          else if (v == "start") c.compare = ComparisonPoint::kWordStart;
          else bad_value("analysis.compare", v, "'end' or 'start'");
        },
        [](const R& c) { return std::string(c.compare == ComparisonPoint::kWordEnd ? "end" : "start"); }};
    t["analysis.frame_mapping"] = {
        [](R& c, const std::string& v) {
          if (v == "start") c.frame_mapping = FrameMapping::kWindowStart;
          else if (v == "end") c.frame_mapping = FrameMapping::kWindowEnd;
          else bad_value("analysis.frame_mapping", v, "'start' (4r) or 'end' (4r+3)");
        },
        [](const R& c) {
          return std::string(c.frame_mapping == FrameMapping::kWindowStart ? "start" : "end");
        }};

    t["embed.include_eos"] = {
        [](R& c, const std::string& v) { c.include_eos = parse_bool("embed.include_eos", v); },
        [](const R& c) { return std::string(c.include_eos ? "true" : "false"); }};
    t["nn.metric"] = {
        [](R& c, const std::string& v) {
          if (v == "cosine") c.metric = Metric::kCosine;
          else if (v == "euclidean") c.metric = Metric::kEuclidean;
          else bad_value("nn.metric", v, "'cosine' or 'euclidean'");
        },
        [](const R& c) { return std::string(c.metric == Metric::kCosine ? "cosine" : "euclidean"); }};
    t["nn.k"] = top(&R::nn_k);
    t["project.sample"] = top(&R::sample);
    t["project.sample_seed"] = top(&R::sample_seed);
    t["project.method"] = {
        [](R& c, const std::string& v) {
          if (v != "tsne" && v != "pca") bad_value("project.method", v, "'tsne' or 'pca'");
          c.projection = v;
        },
        [](const R& c) { return c.projection; }};
    t["tsne.perplexity"] = num(&R::tsne, &TsneConfig::perplexity);
    t["tsne.iterations"] = num(&R::tsne, &TsneConfig::iterations);
    t["tsne.learning_rate"] = num(&R::tsne, &TsneConfig::learning_rate);
    t["tsne.initial_momentum"] = num(&R::tsne, &TsneConfig::initial_momentum);
    t["tsne.final_momentum"] = num(&R::tsne, &TsneConfig::final_momentum);
    t["tsne.momentum_switch_iter"] = num(&R::tsne, &TsneConfig::momentum_switch_iter);
    t["tsne.exaggeration"] = num(&R::tsne, &TsneConfig::exaggeration);
    t["tsne.exaggeration_iters"] = num(&R::tsne, &TsneConfig::exaggeration_iters);
    t["tsne.adaptive_gains"] = {
        [](R& c, const std::string& v) { c.tsne.adaptive_gains = parse_bool("tsne.adaptive_gains", v); },
        [](const R& c) { return std::string(c.tsne.adaptive_gains ? "true" : "false"); }};
    t["tsne.seed"] = num(&R::tsne, &TsneConfig::seed);
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) fail(ErrorKind::kConfig, "unknown config key: " + key);
  try {
    it->second.set(*this, value);
  } catch (const Error& e) {
    // Numeric parsers don't know the key; name it here.
    if (std::string(e.what()).find(key) == std::string::npos) {
      fail(ErrorKind::kConfig, "config key " + key + ": invalid value '" + value + "'");
    }
    throw;
  }
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorKind::kConfig, "expected key=value, got '" + assignment + "'");
  set(std::string(trim(std::string_view(assignment).substr(0, eq))),
      std::string(trim(std::string_view(assignment).substr(eq + 1))));
}

void RunConfig::load_file(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      set_assignment(std::string(line));
    } catch (const Error& e) {
      fail(e.kind(), path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [key, field] : fields()) v.push_back(key);
    return v;
  }();
  return names;
}

}  // namespace a2w
