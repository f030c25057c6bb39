// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors
//
// Acoustic-to-word attention model.
//
//   encoder   3 bidirectional LSTM layers; between layers adjacent frame
//             pairs are concatenated (trailing odd frame dropped), so the
//             top layer runs at T' = floor(floor(T / 2) / 2) frames.
//   attention location-aware: the previous attention row is convolved with
//             K kernels of width w, and
//               e_i   = v . tanh(s W + h_i Vh + f_i U + b)
//               alpha = softmax(e),   context = sum_i alpha_i h_i
//             where s is the previous decoder hidden state.
//   decoder   one LSTM layer over [embed(y_prev) | context]; logits are
//             [h | context] Wo + bo.
//
// Weight matrices are stored input-major ([n_in x n_out]) so every
// projection is a row vector times a matrix. LSTM gate blocks are ordered
// input, forget, cell, output.

#ifndef A2W_MODEL_H_
#define A2W_MODEL_H_

#include <span>
#include <vector>

#include "a2w/corpus.h"
#include "a2w/numerics.h"

namespace a2w {

inline constexpr int kEncoderLayers = 3;
inline constexpr int kReductionFactor = 4;

struct ModelConfig {
  int feature_dim = 16;     // d
  int hidden = 64;          // H, per direction
  int vocab_size = 15;      // V, including reserved tokens
  int embed_dim = 32;       // E
  int att_channels = 10;    // K
  int att_width = 25;       // w, odd
  int att_dim = 64;         // A
  int decoder_units = 64;   // S

  void validate() const;
  int encoder_dim() const { return 2 * hidden; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

using ModelParams = ParamStore;

// Parameters named and shaped for `config`, all zero.
ModelParams make_params(const ModelConfig& config);
// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor, scaled by `scale`.
ModelParams init_params(const ModelConfig& config, Rng& rng, double scale = 1.0);
// Throws unless `params` has exactly the layout of make_params(config) and
// every value is finite.
void check_params(const ModelParams& params, const ModelConfig& config);

// Reduced frame count after the pyramid.
std::size_t reduced_length(std::size_t input_frames);

struct EncoderStates {
  Tensor h;      // [T' x 2H], forward | backward
  Tensor keys;   // [T' x A], h * Vh, reused by every attention step
  int reduction_factor = kReductionFactor;

  std::size_t frames() const { return h.rows(); }
};

struct AttentionTrace {
  Tensor alpha;  // [U x T'], one distribution per emitted token

  std::size_t steps() const { return alpha.rows(); }
  std::span<const double> row(std::size_t u) const { return alpha.row(u); }
};

struct DecoderState {
  std::vector<double> h, c;        // size S
  std::vector<double> prev_alpha;  // size T'
};

struct LstmWeights {
  const Tensor& wx;  // [n_in x 4n]
  const Tensor& wh;  // [n x 4n]
  const Tensor& b;   // [4n]
};

struct LstmOutput {
  std::vector<double> h, c;
};

LstmOutput lstm_step(std::span<const double> x, std::span<const double> h_prev,
                     std::span<const double> c_prev, const LstmWeights& weights);

EncoderStates encode(const Tensor& features, const ModelParams& params, const ModelConfig& config);

DecoderState initial_decoder_state(const ModelConfig& config, std::size_t reduced_frames);

struct Attention {
  std::vector<double> alpha;    // T'
  std::vector<double> context;  // 2H
};

Attention attend(const DecoderState& state, const EncoderStates& enc, const ModelParams& params,
                 const ModelConfig& config);

struct StepOutput {
  std::vector<double> logits;
  DecoderState state;
  std::vector<double> alpha;
};

StepOutput decode_step(int y_prev, const DecoderState& state, const EncoderStates& enc,
                       const ModelParams& params, const ModelConfig& config);

struct LossResult {
  double nll = 0.0;
  AttentionTrace trace;
};

// Teacher-forced cross entropy. The decoder reads #sos# then the targets;
// it must predict the targets then #eos#. When `grads` is non-null it is
// overwritten with d nll / d params.
LossResult loss(const Tensor& features, std::span<const int> targets, const ModelParams& params,
                const ModelConfig& config, ModelParams* grads = nullptr);

// Maps words through `vocab` (unknown words become #unk#).
LossResult loss(const Utterance& utterance, const Vocabulary& vocab, const ModelParams& params,
                const ModelConfig& config, ModelParams* grads = nullptr);

std::vector<int> word_ids(const std::vector<std::string>& words, const Vocabulary& vocab);

}  // namespace a2w

#endif  // A2W_MODEL_H_
