// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors
//
// One configuration object for every subcommand. Sources, later wins:
// built-in defaults, a `key = value` file (# starts a comment), then
// command-line overrides. Unknown keys are errors.

#ifndef A2W_RUN_CONFIG_H_
#define A2W_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "a2w/analysis.h"
#include "a2w/corpus.h"
#include "a2w/embeddings.h"
#include "a2w/model.h"
#include "a2w/training.h"

namespace a2w {

struct RunConfig {
  CorpusConfig corpus;
  std::uint64_t corpus_seed = 42;
  // feature_dim and vocab_size are taken from the corpus at train time.
  ModelConfig model;
  TrainConfig train;

  int beam = 1;
  int max_len = 0;  // 0 = 2 T' + 10

  ComparisonPoint compare = ComparisonPoint::kWordEnd;
  FrameMapping frame_mapping = FrameMapping::kWindowStart;

  bool include_eos = true;
  Metric metric = Metric::kCosine;
  int nn_k = 10;
  int sample = 300;
  std::uint64_t sample_seed = 7;
  std::string projection = "tsne";  // or "pca"
  TsneConfig tsne;

  // Throws a config error for an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  // "key=value"
  void set_assignment(const std::string& assignment);
  void load_file(const std::filesystem::path& path);

  // Every key with its current value, one `key = value` per line, sorted.
  std::string resolved() const;
  static const std::vector<std::string>& keys();
};

}  // namespace a2w

#endif  // A2W_RUN_CONFIG_H_
