// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#include "a2w/training.h"

#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "a2w/binary_io.h"
#include "a2w/decoding.h"
#include "a2w/errors.h"

namespace a2w {

using nlohmann::json;

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kConfig, "train config: " + what); };
  if (epochs < 0) bad("epochs must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) bad("epsilon must be > 0");
  if (!(grad_clip_norm > 0.0)) bad("grad_clip_norm must be > 0");
  if (!(init_scale > 0.0)) bad("init_scale must be > 0");
  if (log_every < 0) bad("log_every must be >= 0");
}

AdamState make_adam_state(const ModelParams& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

double clip_global_norm(ModelParams& grads, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (double g : grads[i].values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) fail(ErrorKind::kTraining, "non-finite gradient norm");
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (std::size_t i = 0; i < grads.size(); ++i) {
      for (double& g : grads[i].values()) g *= scale;
    }
  }
  return norm;
}

void adam_update(ModelParams& params, ModelParams& grads, AdamState& state,
                 const TrainConfig& config) {
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v)) {
    fail(ErrorKind::kDimension, "adam_update: parameter, gradient and moment layouts differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].all_finite()) {
      fail(ErrorKind::kTraining, "non-finite gradient in " + grads.name(i) + " at step " +
                                     std::to_string(state.step + 1));
    }
  }
  clip_global_norm(grads, config.grad_clip_norm);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  const double b1 = config.beta1, b2 = config.beta2;
  const double lr = config.learning_rate, eps = config.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].data();
    const double* g = grads[i].data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    const std::size_t n = params[i].size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint format

namespace {

constexpr std::string_view kCheckpointMagic = "A2WC";
constexpr std::uint32_t kCheckpointVersion = 1;

json model_to_json(const ModelConfig& c) {
  return {{"feature_dim", c.feature_dim}, {"hidden", c.hidden},
          {"vocab_size", c.vocab_size},   {"embed_dim", c.embed_dim},
          {"att_channels", c.att_channels}, {"att_width", c.att_width},
          {"att_dim", c.att_dim},         {"decoder_units", c.decoder_units}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.att_channels = j.at("att_channels").get<int>();
  c.att_width = j.at("att_width").get<int>();
  c.att_dim = j.at("att_dim").get<int>();
  c.decoder_units = j.at("decoder_units").get<int>();
  return c;
}

json train_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},           {"beta2", c.beta2},
          {"epsilon", c.epsilon},       {"grad_clip_norm", c.grad_clip_norm},
          {"init_seed", c.init_seed},   {"shuffle_seed", c.shuffle_seed},
          {"init_scale", c.init_scale}, {"log_every", c.log_every}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  c.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  c.init_scale = j.at("init_scale").get<double>();
  c.log_every = j.at("log_every").get<int>();
  return c;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const std::pair<const char*, const ModelParams*> groups[] = {
      {"param/", &ckpt.params}, {"adam_m/", &ckpt.adam.m}, {"adam_v/", &ckpt.adam.v}};
  json dir = json::array();
  std::uint64_t offset = 0;
  for (const auto& [prefix, store] : groups) {
    for (std::size_t i = 0; i < store->size(); ++i) {
      const Tensor& t = (*store)[i];
      dir.push_back({{"name", std::string(prefix) + store->name(i)},
                     {"dtype", "f64"},
                     {"shape", t.shape()},
                     {"offset", offset}});
      offset += 8 * t.size();
    }
  }
  json header = {{"model", model_to_json(ckpt.model)},
                 {"train", train_to_json(ckpt.train)},
                 {"epoch", ckpt.epoch},
                 {"adam_step", ckpt.adam.step},
                 {"shuffle_rng", ckpt.shuffle_rng},
                 {"tensors", dir}};
  const std::string text = header.dump();

  ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(text);
  for (const auto& [prefix, store] : groups) {
    for (std::size_t i = 0; i < store->size(); ++i) {
      for (double v : (*store)[i].values()) w.f64(v);
    }
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(std::string bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  r.expect_magic(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kFormat, source + ": checkpoint version " + std::to_string(version) +
                                 ", expected " + std::to_string(kCheckpointVersion));
  }
  json header;
  try {
    header = json::parse(r.str());
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, source + ": malformed checkpoint header: " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.model = model_from_json(header.at("model"));
    ckpt.train = train_from_json(header.at("train"));
    ckpt.epoch = header.at("epoch").get<int>();
    ckpt.adam.step = header.at("adam_step").get<std::int64_t>();
    ckpt.shuffle_rng = header.at("shuffle_rng").get<std::string>();
    const std::size_t payload_start = r.position();
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      if (entry.at("dtype").get<std::string>() != "f64") {
        fail(ErrorKind::kFormat, source + ": tensor " + name + " has unsupported dtype");
      }
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      if (payload_start + offset != r.position()) {
        fail(ErrorKind::kFormat, source + ": tensor " + name + " offset is not contiguous");
      }
      ModelParams* target = nullptr;
      std::string base;
      for (auto [prefix, store] : {std::pair<std::string_view, ModelParams*>{"param/", &ckpt.params},
                                   {"adam_m/", &ckpt.adam.m},
                                   {"adam_v/", &ckpt.adam.v}}) {
        if (name.starts_with(prefix)) {
          target = store;
          base = name.substr(prefix.size());
        }
      }
      if (!target) fail(ErrorKind::kFormat, source + ": unknown tensor group in " + name);
      Tensor& t = target->add(base, shape);
      for (double& v : t.values()) v = r.f64();
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, source + ": bad checkpoint header field: " + e.what());
  }
  r.expect_end();
  ckpt.model.validate();
  check_params(ckpt.params, ckpt.model);
  if (!ckpt.params.same_layout(ckpt.adam.m) || !ckpt.params.same_layout(ckpt.adam.v)) {
    fail(ErrorKind::kFormat, source + ": optimizer moments do not match the parameters");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Training loop

Checkpoint initial_checkpoint(const ModelConfig& model, const TrainConfig& train) {
  model.validate();
  train.validate();
  Checkpoint ckpt;
  ckpt.model = model;
  ckpt.train = train;
  Rng init = Rng::derive(train.init_seed, "init");
  ckpt.params = init_params(model, init, train.init_scale);
  ckpt.adam = make_adam_state(ckpt.params);
  ckpt.epoch = 0;
  ckpt.shuffle_rng = Rng::derive(train.shuffle_seed, "shuffle").serialize();
  return ckpt;
}

std::string format_metrics_line(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "\t" + format_double(m.train_nll) + "\t" +
         format_double(m.val_wer);
}

TrainResult train(const std::vector<Utterance>& train_set, const std::vector<Utterance>& val_set,
                  const Vocabulary& vocab, Checkpoint start, const TrainOptions& options) {
  if (train_set.empty()) fail(ErrorKind::kData, "train: empty training split");
  start.model.validate();
  start.train.validate();
  if (vocab.size() != start.model.vocab_size) {
    fail(ErrorKind::kConfig, "vocabulary has " + std::to_string(vocab.size()) +
                                 " entries, model expects " +
                                 std::to_string(start.model.vocab_size));
  }
  check_params(start.params, start.model);
  if (options.out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*options.out_dir, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create " + options.out_dir->string() + ": " + ec.message());
  }

  TrainResult result;
  result.checkpoint = std::move(start);
  Checkpoint& ckpt = result.checkpoint;
  const ModelConfig& mc = ckpt.model;
  const TrainConfig& tc = ckpt.train;
  Rng shuffle;
  shuffle.deserialize(ckpt.shuffle_rng);
  ModelParams grads = ckpt.params.zeros_like();

  int epochs_run = 0;
  while (ckpt.epoch < tc.epochs &&
         (options.max_epochs_this_call < 0 || epochs_run < options.max_epochs_this_call)) {
    const int epoch = ckpt.epoch + 1;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle.shuffle(order);

    double nll_sum = 0.0;
    std::size_t step_in_epoch = 0;
    for (std::size_t idx : order) {
      const Utterance& utt = train_set[idx];
      double nll = 0.0;
      try {
        nll = loss(utt, vocab, ckpt.params, mc, &grads).nll;
        adam_update(ckpt.params, grads, ckpt.adam, tc);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric && e.kind() != ErrorKind::kTraining) throw;
        std::string where = options.out_dir ? "; last good checkpoint kept in " +
                                                  options.out_dir->string()
                                            : "";
        fail(ErrorKind::kTraining, "training diverged at epoch " + std::to_string(epoch) +
                                       " on " + utt.id + ": " + e.what() + where);
      }
      nll_sum += nll;
      ++step_in_epoch;
      if (options.log && tc.log_every > 0 && step_in_epoch % static_cast<std::size_t>(tc.log_every) == 0) {
        *options.log << "epoch " << epoch << " step " << step_in_epoch << " mean nll "
                     << nll_sum / static_cast<double>(step_in_epoch) << "\n";
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_nll = nll_sum / static_cast<double>(train_set.size());
    if (!val_set.empty()) {
      std::vector<std::vector<std::string>> refs, hyps;
      for (const auto& u : val_set) {
        refs.push_back(u.words);
        hyps.push_back(greedy_decode(u, ckpt.params, mc, vocab).hypothesis);
      }
      m.val_wer = corpus_wer(refs, hyps);
    } else {
      m.val_wer = std::nan("");
    }

    ckpt.epoch = epoch;
    ckpt.shuffle_rng = shuffle.serialize();
    result.metrics.push_back(m);
    ++epochs_run;

    if (options.out_dir) {
      save_checkpoint(*options.out_dir / "last.a2wc", ckpt);
      std::ofstream log(*options.out_dir / "metrics.tsv", std::ios::app);
      log << format_metrics_line(m) << "\n";
      if (!log) fail(ErrorKind::kIo, "cannot append metrics to " + options.out_dir->string());
    }
    if (options.log) *options.log << format_metrics_line(m) << std::endl;
    if (options.on_epoch) options.on_epoch(m);
  }
  return result;
}

}  // namespace a2w
