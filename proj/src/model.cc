// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors

#include "a2w/model.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "a2w/errors.h"

namespace a2w {

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kConfig, "model config: " + what); };
  if (feature_dim < 1 || hidden < 1 || embed_dim < 1 || att_channels < 1 || att_width < 1 ||
      att_dim < 1 || decoder_units < 1) {
    bad("all dimensions must be >= 1");
  }
  if (att_width % 2 == 0) bad("att_width must be odd");
  if (vocab_size < 4) bad("vocab_size must be >= 4 (three reserved tokens plus one word)");
}

std::size_t reduced_length(std::size_t input_frames) { return (input_frames / 2) / 2; }

namespace {

const char* const kDirections[2] = {"fw", "bw"};

std::string enc_name(int layer, int dir, const char* what) {
  return "enc.l" + std::to_string(layer + 1) + "." + kDirections[dir] + "." + what;
}

template <class T>
struct LstmRefs {
  T* wx;
  T* wh;
  T* b;
};

template <class T>
struct Refs {
  std::array<std::array<LstmRefs<T>, 2>, kEncoderLayers> enc;
  T* att_w;
  T* att_vh;
  T* att_u;
  T* att_f;
  T* att_v;
  T* att_b;
  T* embed;
  LstmRefs<T> dec;
  T* out_w;
  T* out_b;
};

template <class T, class Store>
Refs<T> resolve(Store& p) {
  Refs<T> r{};
  for (int l = 0; l < kEncoderLayers; ++l) {
    for (int d = 0; d < 2; ++d) {
      r.enc[l][d] = {&p.at(enc_name(l, d, "wx")), &p.at(enc_name(l, d, "wh")),
                     &p.at(enc_name(l, d, "b"))};
    }
  }
  r.att_w = &p.at("att.W");
  r.att_vh = &p.at("att.Vh");
  r.att_u = &p.at("att.U");
  r.att_f = &p.at("att.F");
  r.att_v = &p.at("att.v");
  r.att_b = &p.at("att.b");
  r.embed = &p.at("dec.embed");
  r.dec = {&p.at("dec.wx"), &p.at("dec.wh"), &p.at("dec.b")};
  r.out_w = &p.at("out.W");
  r.out_b = &p.at("out.b");
  return r;
}

using ConstRefs = Refs<const Tensor>;
using GradRefs = Refs<Tensor>;

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

// ---------------------------------------------------------------------------
// LSTM cell

// pre: [4n] pre-activations. Writes activated gates (i, f, g, o), c, tanh(c), h.
void cell_forward(const double* pre, const double* c_prev, std::size_t n, double* gates,
                  double* c, double* tc, double* h) {
  for (std::size_t j = 0; j < n; ++j) {
    const double i = sigmoid(pre[j]);
    const double f = sigmoid(pre[n + j]);
    const double g = std::tanh(pre[2 * n + j]);
    const double o = sigmoid(pre[3 * n + j]);
    gates[j] = i;
    gates[n + j] = f;
    gates[2 * n + j] = g;
    gates[3 * n + j] = o;
    c[j] = f * c_prev[j] + i * g;
    tc[j] = std::tanh(c[j]);
    h[j] = o * tc[j];
  }
}

// dc_in is the gradient reaching c from later steps; dh the gradient on h.
void cell_backward(const double* gates, const double* c_prev, const double* tc, const double* dh,
                   const double* dc_in, std::size_t n, double* dpre, double* dc_prev) {
  for (std::size_t j = 0; j < n; ++j) {
    const double i = gates[j];
    const double f = gates[n + j];
    const double g = gates[2 * n + j];
    const double o = gates[3 * n + j];
    const double dc = dc_in[j] + dh[j] * o * (1.0 - tc[j] * tc[j]);
    const double d_o = dh[j] * tc[j];
    dpre[j] = dc * g * i * (1.0 - i);
    dpre[n + j] = dc * c_prev[j] * f * (1.0 - f);
    dpre[2 * n + j] = dc * i * (1.0 - g * g);
    dpre[3 * n + j] = d_o * o * (1.0 - o);
    dc_prev[j] = dc * f;
  }
}

// ---------------------------------------------------------------------------
// LSTM over a sequence

struct LstmSeqCache {
  Tensor x;      // [T x n_in]
  Tensor gates;  // [T x 4n]
  Tensor c, tc, h;  // [T x n]
};

void lstm_seq_forward(const Tensor& x, const LstmRefs<const Tensor>& w, LstmSeqCache& cache) {
  const std::size_t steps = x.rows();
  const std::size_t n_in = x.cols();
  const std::size_t n = w.wh->rows();
  if (w.wx->rows() != n_in || w.wx->cols() != 4 * n) {
    fail(ErrorKind::kDimension, "lstm input " + shape_string(x.shape()) + " vs weights " +
                                    shape_string(w.wx->shape()));
  }
  cache.x = x;
  Tensor pre({steps, 4 * n});
  for (std::size_t t = 0; t < steps; ++t) std::copy_n(w.b->data(), 4 * n, pre.row(t).data());
  gemm_acc(x.values(), w.wx->values(), pre.values(), steps, n_in, 4 * n);

  cache.gates = Tensor({steps, 4 * n});
  cache.c = Tensor({steps, n});
  cache.tc = Tensor({steps, n});
  cache.h = Tensor({steps, n});
  const std::vector<double> zeros(n, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* c_prev = t > 0 ? cache.c.row(t - 1).data() : zeros.data();
    auto pre_t = pre.row(t);
    if (t > 0) vecmat_acc(cache.h.row(t - 1), *w.wh, pre_t);
    cell_forward(pre_t.data(), c_prev, n, cache.gates.row(t).data(), cache.c.row(t).data(),
                 cache.tc.row(t).data(), cache.h.row(t).data());
  }
}

void lstm_seq_backward(const LstmSeqCache& cache, const LstmRefs<const Tensor>& w,
                       const Tensor& dh_out, const LstmRefs<Tensor>& g, Tensor* dx) {
  const std::size_t steps = cache.x.rows();
  const std::size_t n_in = cache.x.cols();
  const std::size_t n = w.wh->rows();
  Tensor dpre({steps, 4 * n});
  std::vector<double> dh(n), dh_next(n, 0.0), dc_next(n, 0.0), dc_prev(n);
  const std::vector<double> zeros(n, 0.0);
  const Tensor wh_t = transpose(*w.wh);  // [4n x n]
  for (std::size_t t = steps; t-- > 0;) {
    auto dh_row = dh_out.row(t);
    for (std::size_t j = 0; j < n; ++j) dh[j] = dh_row[j] + dh_next[j];
    const double* c_prev = t > 0 ? cache.c.row(t - 1).data() : zeros.data();
    cell_backward(cache.gates.row(t).data(), c_prev, cache.tc.row(t).data(), dh.data(),
                  dc_next.data(), n, dpre.row(t).data(), dc_prev.data());
    dc_next.swap(dc_prev);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    if (t > 0) {
      vecmat_acc(dpre.row(t), wh_t, dh_next);
      outer_acc(cache.h.row(t - 1), dpre.row(t), *g.wh);
    }
  }
  for (std::size_t t = 0; t < steps; ++t) {
    outer_acc(cache.x.row(t), dpre.row(t), *g.wx);
    axpy(1.0, dpre.row(t), g.b->values());
  }
  if (dx) {
    *dx = Tensor({steps, n_in});
    const Tensor wx_t = transpose(*w.wx);  // [4n x n_in]
    gemm_acc(dpre.values(), wx_t.values(), dx->values(), steps, 4 * n, n_in);
  }
}

// ---------------------------------------------------------------------------
// Bidirectional layer and pyramid

Tensor reverse_rows(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t steps = x.rows();
  for (std::size_t t = 0; t < steps; ++t) {
    auto src = x.row(steps - 1 - t);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

struct BlstmCache {
  LstmSeqCache fw, bw;
};

Tensor blstm_forward(const Tensor& x, const std::array<LstmRefs<const Tensor>, 2>& w,
                     BlstmCache& cache) {
  lstm_seq_forward(x, w[0], cache.fw);
  lstm_seq_forward(reverse_rows(x), w[1], cache.bw);
  const std::size_t steps = x.rows();
  const std::size_t n = w[0].wh->rows();
  Tensor y({steps, 2 * n});
  for (std::size_t t = 0; t < steps; ++t) {
    auto out = y.row(t);
    auto f = cache.fw.h.row(t);
    auto b = cache.bw.h.row(steps - 1 - t);
    std::copy(f.begin(), f.end(), out.begin());
    std::copy(b.begin(), b.end(), out.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return y;
}

void blstm_backward(const BlstmCache& cache, const std::array<LstmRefs<const Tensor>, 2>& w,
                    const Tensor& dy, const std::array<LstmRefs<Tensor>, 2>& g, Tensor* dx) {
  const std::size_t steps = dy.rows();
  const std::size_t n = w[0].wh->rows();
  Tensor dh_fw({steps, n}), dh_bw({steps, n});  // dh_bw in reversed time
  for (std::size_t t = 0; t < steps; ++t) {
    auto src = dy.row(t);
    std::copy_n(src.begin(), n, dh_fw.row(t).begin());
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(n), n, dh_bw.row(steps - 1 - t).begin());
  }
  Tensor dx_fw, dx_bw;
  lstm_seq_backward(cache.fw, w[0], dh_fw, g[0], dx ? &dx_fw : nullptr);
  lstm_seq_backward(cache.bw, w[1], dh_bw, g[1], dx ? &dx_bw : nullptr);
  if (dx) {
    *dx = std::move(dx_fw);
    for (std::size_t t = 0; t < steps; ++t) axpy(1.0, dx_bw.row(steps - 1 - t), dx->row(t));
  }
}

// Concatenates frames (2t, 2t+1); a trailing odd frame is dropped. Row-major
// storage makes this a truncating reshape.
Tensor pair_frames(const Tensor& y) {
  const std::size_t half = y.rows() / 2;
  const std::size_t width = y.cols();
  std::vector<double> data(y.values().begin(),
                           y.values().begin() + static_cast<std::ptrdiff_t>(half * 2 * width));
  return Tensor({half, 2 * width}, std::move(data));
}

Tensor unpair_frames(const Tensor& dz, std::size_t rows) {
  const std::size_t width = dz.cols() / 2;
  Tensor out({rows, width});
  std::copy(dz.values().begin(), dz.values().end(), out.values().begin());
  return out;
}

struct EncoderCache {
  std::array<BlstmCache, kEncoderLayers> layers;
  std::array<std::size_t, kEncoderLayers> rows{};  // frames entering each layer
};

std::array<LstmRefs<const Tensor>, 2> layer_refs(const ConstRefs& p, int l) {
  return {p.enc[static_cast<std::size_t>(l)][0], p.enc[static_cast<std::size_t>(l)][1]};
}

EncoderStates encode_impl(const Tensor& features, const ConstRefs& p, const ModelConfig& config,
                          EncoderCache& cache) {
  if (features.rank() != 2 || features.cols() != sz(config.feature_dim)) {
    fail(ErrorKind::kDimension, "features " + shape_string(features.shape()) +
                                    " do not match feature_dim " +
                                    std::to_string(config.feature_dim));
  }
  if (features.rows() < 4) {
    fail(ErrorKind::kDomain, "input too short: " + std::to_string(features.rows()) +
                                 " frames, the pyramid needs at least 4");
  }
  Tensor x = features;
  for (int l = 0; l < kEncoderLayers; ++l) {
    cache.rows[static_cast<std::size_t>(l)] = x.rows();
    Tensor y = blstm_forward(x, layer_refs(p, l), cache.layers[static_cast<std::size_t>(l)]);
    x = l + 1 < kEncoderLayers ? pair_frames(y) : std::move(y);
  }
  EncoderStates enc;
  enc.h = std::move(x);
  enc.keys = matmul(enc.h, *p.att_vh);
  return enc;
}

void encoder_backward(const EncoderCache& cache, const ConstRefs& p, const Tensor& dh,
                      const GradRefs& g) {
  Tensor dy = dh;
  for (int l = kEncoderLayers; l-- > 0;) {
    const auto li = static_cast<std::size_t>(l);
    const std::array<LstmRefs<Tensor>, 2> gl = {g.enc[li][0], g.enc[li][1]};
    if (l == 0) {
      blstm_backward(cache.layers[li], layer_refs(p, l), dy, gl, nullptr);
    } else {
      Tensor dz;
      blstm_backward(cache.layers[li], layer_refs(p, l), dy, gl, &dz);
      dy = unpair_frames(dz, cache.rows[li - 1]);
    }
  }
}

// ---------------------------------------------------------------------------
// Attention

struct AttendCache {
  std::vector<double> prev_alpha;
  Tensor conv;  // [T' x K]
  Tensor z;     // [T' x A], tanh of the pre-activation
  std::vector<double> alpha;
  std::vector<double> context;
};

void attend_impl(const ConstRefs& p, const EncoderStates& enc, std::span<const double> s_prev,
                 std::span<const double> prev_alpha, AttendCache& out) {
  const std::size_t frames = enc.frames();
  if (prev_alpha.size() != frames) {
    fail(ErrorKind::kDimension, "previous attention has " + std::to_string(prev_alpha.size()) +
                                    " entries, encoder has " + std::to_string(frames) + " frames");
  }
  const std::size_t a_dim = p.att_v->size();
  std::vector<double> ws(p.att_b->values().begin(), p.att_b->values().end());
  vecmat_acc(s_prev, *p.att_w, ws);

  out.prev_alpha.assign(prev_alpha.begin(), prev_alpha.end());
  out.conv = conv1d_same(prev_alpha, *p.att_f);
  out.z = Tensor({frames, a_dim});
  out.alpha.assign(frames, 0.0);
  for (std::size_t i = 0; i < frames; ++i) {
    auto zi = out.z.row(i);
    auto key = enc.keys.row(i);
    for (std::size_t a = 0; a < a_dim; ++a) zi[a] = key[a] + ws[a];
    vecmat_acc(out.conv.row(i), *p.att_u, zi);
    for (double& v : zi) v = std::tanh(v);
    out.alpha[i] = dot(zi, p.att_v->values());
  }
  softmax_inplace(out.alpha);
  out.context.assign(enc.h.cols(), 0.0);
  vecmat_acc(out.alpha, enc.h, out.context);
}

// Accumulates parameter gradients into g, encoder-state gradients into dh
// and dkeys, and the previous decoder state gradient into ds_prev. Writes
// the gradient w.r.t. the previous attention row into dprev_alpha.
void attend_backward(const ConstRefs& p, const EncoderStates& enc, std::span<const double> s_prev,
                     const AttendCache& cache, std::span<const double> dcontext,
                     std::span<const double> dalpha_in, const GradRefs& g, Tensor& dh,
                     Tensor& dkeys, std::span<double> ds_prev, std::span<double> dprev_alpha) {
  const std::size_t frames = enc.frames();
  const std::size_t a_dim = p.att_v->size();
  const std::size_t channels = p.att_f->rows();
  const std::size_t width = p.att_f->cols();
  const auto pad = static_cast<std::ptrdiff_t>((width - 1) / 2);

  std::vector<double> dalpha(dalpha_in.begin(), dalpha_in.end());
  for (std::size_t i = 0; i < frames; ++i) {
    dalpha[i] += dot(enc.h.row(i), dcontext);
    axpy(cache.alpha[i], dcontext, dh.row(i));
  }
  double weighted = 0.0;
  for (std::size_t i = 0; i < frames; ++i) weighted += cache.alpha[i] * dalpha[i];

  std::vector<double> dpre(a_dim), dpre_sum(a_dim, 0.0), dconv(channels);
  const auto v = p.att_v->values();
  for (std::size_t i = 0; i < frames; ++i) {
    const double de = cache.alpha[i] * (dalpha[i] - weighted);
    auto zi = cache.z.row(i);
    axpy(de, zi, g.att_v->values());
    for (std::size_t a = 0; a < a_dim; ++a) dpre[a] = de * v[a] * (1.0 - zi[a] * zi[a]);
    axpy(1.0, dpre, dkeys.row(i));
    axpy(1.0, dpre, dpre_sum);

    std::fill(dconv.begin(), dconv.end(), 0.0);
    matvec_acc(*p.att_u, dpre, dconv);
    outer_acc(cache.conv.row(i), dpre, *g.att_u);
    for (std::size_t k = 0; k < channels; ++k) {
      for (std::size_t j = 0; j < width; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + j) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
        const auto s = static_cast<std::size_t>(src);
        (*g.att_f)(k, j) += dconv[k] * cache.prev_alpha[s];
        dprev_alpha[s] += dconv[k] * (*p.att_f)(k, j);
      }
    }
  }
  axpy(1.0, dpre_sum, g.att_b->values());
  outer_acc(s_prev, dpre_sum, *g.att_w);
  matvec_acc(*p.att_w, dpre_sum, ds_prev);
}

// ---------------------------------------------------------------------------
// Decoder step

struct StepCache {
  int y_prev = 0;
  AttendCache att;
  std::vector<double> x;  // [embed | context]
  std::vector<double> h_prev, c_prev;
  std::vector<double> gates, c, tc, h;
  std::vector<double> out_in;  // [h | context]
  std::vector<double> logits;
};

void step_forward(const ConstRefs& p, const ModelConfig& config, const EncoderStates& enc,
                  int y_prev, std::span<const double> h_prev, std::span<const double> c_prev,
                  std::span<const double> prev_alpha, StepCache& sc) {
  if (y_prev < 0 || y_prev >= config.vocab_size) {
    fail(ErrorKind::kDomain, "previous token index out of range: " + std::to_string(y_prev));
  }
  const std::size_t s_dim = sz(config.decoder_units);
  sc.y_prev = y_prev;
  attend_impl(p, enc, h_prev, prev_alpha, sc.att);

  auto emb = p.embed->row(static_cast<std::size_t>(y_prev));
  sc.x.assign(emb.begin(), emb.end());
  sc.x.insert(sc.x.end(), sc.att.context.begin(), sc.att.context.end());
  sc.h_prev.assign(h_prev.begin(), h_prev.end());
  sc.c_prev.assign(c_prev.begin(), c_prev.end());

  std::vector<double> pre(p.dec.b->values().begin(), p.dec.b->values().end());
  vecmat_acc(sc.x, *p.dec.wx, pre);
  vecmat_acc(sc.h_prev, *p.dec.wh, pre);
  sc.gates.resize(4 * s_dim);
  sc.c.resize(s_dim);
  sc.tc.resize(s_dim);
  sc.h.resize(s_dim);
  cell_forward(pre.data(), sc.c_prev.data(), s_dim, sc.gates.data(), sc.c.data(), sc.tc.data(),
               sc.h.data());

  sc.out_in = sc.h;
  sc.out_in.insert(sc.out_in.end(), sc.att.context.begin(), sc.att.context.end());
  sc.logits.assign(p.out_b->values().begin(), p.out_b->values().end());
  vecmat_acc(sc.out_in, *p.out_w, sc.logits);
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters

ModelParams make_params(const ModelConfig& config) {
  config.validate();
  const std::size_t d = sz(config.feature_dim), h = sz(config.hidden), v = sz(config.vocab_size),
                    e = sz(config.embed_dim), k = sz(config.att_channels), w = sz(config.att_width),
                    a = sz(config.att_dim), s = sz(config.decoder_units);
  ModelParams p;
  for (int l = 0; l < kEncoderLayers; ++l) {
    const std::size_t n_in = l == 0 ? d : 4 * h;
    for (int dir = 0; dir < 2; ++dir) {
      p.add(enc_name(l, dir, "wx"), {n_in, 4 * h});
      p.add(enc_name(l, dir, "wh"), {h, 4 * h});
      p.add(enc_name(l, dir, "b"), {4 * h});
    }
  }
  p.add("att.W", {s, a});
  p.add("att.Vh", {2 * h, a});
  p.add("att.U", {k, a});
  p.add("att.F", {k, w});
  p.add("att.v", {a});
  p.add("att.b", {a});
  p.add("dec.embed", {v, e});
  p.add("dec.wx", {e + 2 * h, 4 * s});
  p.add("dec.wh", {s, 4 * s});
  p.add("dec.b", {4 * s});
  p.add("out.W", {s + 2 * h, v});
  p.add("out.b", {v});
  return p;
}

ModelParams init_params(const ModelConfig& config, Rng& rng, double scale) {
  ModelParams p = make_params(config);
  for (std::size_t i = 0; i < p.size(); ++i) {
    Tensor& t = p[i];
    const std::string& name = p.name(i);
    std::size_t fan = t.rank() == 2 ? t.rows() : t.size();
    if (name == "att.F") fan = t.cols();
    if (name.starts_with("enc.") || name.starts_with("dec.w") || name == "dec.b") {
      // LSTM tensors: fan is the hidden size of the cell.
      fan = t.shape().back() / 4;
    }
    const double bound = scale / std::sqrt(static_cast<double>(fan));
    for (double& x : t.values()) x = rng.uniform(-bound, bound);
  }
  return p;
}

void check_params(const ModelParams& params, const ModelConfig& config) {
  ModelParams expected = make_params(config);
  if (!params.same_layout(expected)) {
    fail(ErrorKind::kDimension, "parameter layout does not match the model config");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].require_finite(params.name(i));
}

// ---------------------------------------------------------------------------
// Public forward API

LstmOutput lstm_step(std::span<const double> x, std::span<const double> h_prev,
                     std::span<const double> c_prev, const LstmWeights& weights) {
  const std::size_t n = weights.wh.rows();
  if (weights.wh.rank() != 2 || weights.wh.cols() != 4 * n || weights.wx.rank() != 2 ||
      weights.wx.rows() != x.size() || weights.wx.cols() != 4 * n || weights.b.size() != 4 * n ||
      h_prev.size() != n || c_prev.size() != n) {
    fail(ErrorKind::kDimension, "lstm_step: shapes do not match the weights");
  }
  std::vector<double> pre(weights.b.values().begin(), weights.b.values().end());
  vecmat_acc(x, weights.wx, pre);
  vecmat_acc(h_prev, weights.wh, pre);
  std::vector<double> gates(4 * n), tc(n);
  LstmOutput out{std::vector<double>(n), std::vector<double>(n)};
  cell_forward(pre.data(), c_prev.data(), n, gates.data(), out.c.data(), tc.data(), out.h.data());
  return out;
}

EncoderStates encode(const Tensor& features, const ModelParams& params, const ModelConfig& config) {
  const ConstRefs p = resolve<const Tensor>(params);
  EncoderCache cache;
  return encode_impl(features, p, config, cache);
}

DecoderState initial_decoder_state(const ModelConfig& config, std::size_t reduced_frames) {
  if (reduced_frames == 0) fail(ErrorKind::kDomain, "encoder produced no frames");
  DecoderState s;
  s.h.assign(sz(config.decoder_units), 0.0);
  s.c.assign(sz(config.decoder_units), 0.0);
  s.prev_alpha.assign(reduced_frames, 1.0 / static_cast<double>(reduced_frames));
  return s;
}

Attention attend(const DecoderState& state, const EncoderStates& enc, const ModelParams& params,
                 const ModelConfig& config) {
  (void)config;
  const ConstRefs p = resolve<const Tensor>(params);
  AttendCache cache;
  attend_impl(p, enc, state.h, state.prev_alpha, cache);
  return {std::move(cache.alpha), std::move(cache.context)};
}

StepOutput decode_step(int y_prev, const DecoderState& state, const EncoderStates& enc,
                       const ModelParams& params, const ModelConfig& config) {
  const ConstRefs p = resolve<const Tensor>(params);
  StepCache sc;
  step_forward(p, config, enc, y_prev, state.h, state.c, state.prev_alpha, sc);
  StepOutput out;
  out.logits = std::move(sc.logits);
  out.alpha = sc.att.alpha;
  out.state.h = std::move(sc.h);
  out.state.c = std::move(sc.c);
  out.state.prev_alpha = std::move(sc.att.alpha);
  return out;
}

std::vector<int> word_ids(const std::vector<std::string>& words, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab.id(w));
  return ids;
}

LossResult loss(const Tensor& features, std::span<const int> targets, const ModelParams& params,
                const ModelConfig& config, ModelParams* grads) {
  if (targets.empty()) fail(ErrorKind::kDomain, "loss: empty transcript");
  for (int t : targets) {
    if (t < 0 || t >= config.vocab_size) {
      fail(ErrorKind::kDomain, "loss: target index out of range: " + std::to_string(t));
    }
  }
  const ConstRefs p = resolve<const Tensor>(params);
  EncoderCache enc_cache;
  const EncoderStates enc = encode_impl(features, p, config, enc_cache);
  const std::size_t frames = enc.frames();
  const std::size_t steps = targets.size() + 1;
  const std::size_t s_dim = sz(config.decoder_units);

  std::vector<StepCache> caches(steps);
  LossResult result;
  result.trace.alpha = Tensor({steps, frames});
  DecoderState state = initial_decoder_state(config, frames);
  for (std::size_t u = 0; u < steps; ++u) {
    const int y_prev = u == 0 ? kSosId : targets[u - 1];
    const int target = u < targets.size() ? targets[u] : kEosId;
    StepCache& sc = caches[u];
    step_forward(p, config, enc, y_prev, state.h, state.c, state.prev_alpha, sc);
    result.nll += log_sum_exp(sc.logits) - sc.logits[static_cast<std::size_t>(target)];
    std::copy(sc.att.alpha.begin(), sc.att.alpha.end(), result.trace.alpha.row(u).begin());
    state.h = sc.h;
    state.c = sc.c;
    state.prev_alpha = sc.att.alpha;
  }
  if (!std::isfinite(result.nll)) fail(ErrorKind::kNumeric, "loss is not finite");
  if (grads == nullptr) return result;

  if (!grads->same_layout(params)) *grads = params.zeros_like();
  grads->set_zero();
  const GradRefs g = resolve<Tensor>(*grads);
  const std::size_t e_dim = sz(config.embed_dim);
  const std::size_t enc_dim = enc.h.cols();

  Tensor dh_enc({frames, enc_dim});
  Tensor dkeys({frames, enc.keys.cols()});
  std::vector<double> dh_carry(s_dim, 0.0), dc_carry(s_dim, 0.0), dalpha_carry(frames, 0.0);
  std::vector<double> dlogits, dout_in, dh(s_dim), dpre(4 * s_dim), dc_prev(s_dim), dx, dh_prev,
      dprev_alpha;
  for (std::size_t u = steps; u-- > 0;) {
    const StepCache& sc = caches[u];
    const int target = u < targets.size() ? targets[u] : kEosId;

    dlogits = sc.logits;
    softmax_inplace(dlogits);
    dlogits[static_cast<std::size_t>(target)] -= 1.0;
    outer_acc(sc.out_in, dlogits, *g.out_w);
    axpy(1.0, dlogits, g.out_b->values());
    dout_in.assign(s_dim + enc_dim, 0.0);
    matvec_acc(*p.out_w, dlogits, dout_in);

    for (std::size_t j = 0; j < s_dim; ++j) dh[j] = dout_in[j] + dh_carry[j];
    std::vector<double> dcontext(dout_in.begin() + static_cast<std::ptrdiff_t>(s_dim), dout_in.end());

    cell_backward(sc.gates.data(), sc.c_prev.data(), sc.tc.data(), dh.data(), dc_carry.data(),
                  s_dim, dpre.data(), dc_prev.data());
    outer_acc(sc.x, dpre, *g.dec.wx);
    outer_acc(sc.h_prev, dpre, *g.dec.wh);
    axpy(1.0, dpre, g.dec.b->values());
    dx.assign(e_dim + enc_dim, 0.0);
    matvec_acc(*p.dec.wx, dpre, dx);
    axpy(1.0, std::span<const double>(dx).first(e_dim),
         g.embed->row(static_cast<std::size_t>(sc.y_prev)));
    axpy(1.0, std::span<const double>(dx).subspan(e_dim), dcontext);

    dh_prev.assign(s_dim, 0.0);
    matvec_acc(*p.dec.wh, dpre, dh_prev);
    dprev_alpha.assign(frames, 0.0);
    attend_backward(p, enc, sc.h_prev, sc.att, dcontext, dalpha_carry, g, dh_enc, dkeys, dh_prev,
                    dprev_alpha);

    dh_carry.swap(dh_prev);
    dc_carry.swap(dc_prev);
    dalpha_carry.swap(dprev_alpha);
  }

  for (std::size_t i = 0; i < frames; ++i) {
    outer_acc(enc.h.row(i), dkeys.row(i), *g.att_vh);
    matvec_acc(*p.att_vh, dkeys.row(i), dh_enc.row(i));
  }
  encoder_backward(enc_cache, p, dh_enc, g);
  return result;
}

LossResult loss(const Utterance& utterance, const Vocabulary& vocab, const ModelParams& params,
                const ModelConfig& config, ModelParams* grads) {
  const std::vector<int> ids = word_ids(utterance.words, vocab);
  return loss(utterance.features, ids, params, config, grads);
}

}  // namespace a2w
