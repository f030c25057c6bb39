// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#ifndef A2W_TRAINING_H_
#define A2W_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "a2w/corpus.h"
#include "a2w/model.h"
#include "a2w/numerics.h"

namespace a2w {

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip_norm = 5.0;
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 2;
  double init_scale = 1.0;
  int log_every = 0;  // steps between progress lines; 0 = per epoch only

  // learning_rate == 0 is accepted (parameters then stay fixed).
  void validate() const;
};

struct AdamState {
  ModelParams m, v;
  std::int64_t step = 0;
};

AdamState make_adam_state(const ModelParams& params);

// Rescales grads in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(ModelParams& grads, double max_norm);

// Clips `grads` to config.grad_clip_norm, then applies one bias-corrected
// Adam step. Throws a training error on a non-finite gradient.
void adam_update(ModelParams& params, ModelParams& grads, AdamState& state,
                 const TrainConfig& config);

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  ModelParams params;
  AdamState adam;
  int epoch = 0;             // completed epochs
  std::string shuffle_rng;   // serialized Rng state after `epoch` epochs
};

// "A2WC", u32 version, u32 header length, JSON header, tensor payloads.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string bytes, const std::string& source);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochMetrics {
  int epoch = 0;
  double train_nll = 0.0;  // mean per-utterance nll over the epoch
  double val_wer = 0.0;    // corpus-level greedy WER on the validation split
};

struct TrainOptions {
  // When set, the checkpoint after every epoch is written here (atomically
  // replaced) and the metrics log is appended to metrics.tsv.
  std::optional<std::filesystem::path> out_dir;
  // Stop after this many epochs in this call (for interrupted runs); -1 = all.
  int max_epochs_this_call = -1;
  std::ostream* log = nullptr;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;
};

Checkpoint initial_checkpoint(const ModelConfig& model, const TrainConfig& train);

// One shuffled pass per epoch, batch size 1. Continues from `start`
// (use initial_checkpoint for a fresh run).
TrainResult train(const std::vector<Utterance>& train_set, const std::vector<Utterance>& val_set,
                  const Vocabulary& vocab, Checkpoint start, const TrainOptions& options = {});

std::string format_metrics_line(const EpochMetrics& m);

}  // namespace a2w

#endif  // A2W_TRAINING_H_
