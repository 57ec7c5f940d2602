#include "lt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lt/ctc.hpp"
#include "lt/error.hpp"
#include "lt/nn_ops.hpp"
#include "lt/transducer.hpp"

namespace lt {
namespace {

bool uses_blank_net(const ModelConfig& c) {
  return c.criterion == Criterion::kLightweight && c.decouple_blank;
}

std::size_t blank_input_dim(const ModelConfig& c) {
  return c.hidden_dim * (c.enhanced_blank ? 3 : 2);
}

std::size_t argmax(const double* x, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

// Per-worker gradient accumulator, index-aligned with the parameter store
// so worker buffers can be reduced in a fixed order.
class GradSink {
 public:
  explicit GradSink(const ParamStore& params) {
    bufs_.reserve(params.count());
    for (std::size_t i = 0; i < params.count(); ++i) {
      const Param& p = params.all()[i];
      bufs_.emplace_back(p.value.shape());
      index_.emplace(p.name, i);
    }
  }

  Tensor& operator[](const std::string& name) { return bufs_[index_.at(name)]; }

  void add_to(ParamStore& params) const {
    for (std::size_t i = 0; i < bufs_.size(); ++i) {
      auto& g = params.all()[i].grad.values();
      const auto& b = bufs_[i].values();
      for (std::size_t j = 0; j < b.size(); ++j) g[j] += b[j];
    }
  }

 private:
  std::vector<Tensor> bufs_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Encoder: tanh input projection, optional stride-2 mean pooling, then a
// stack of tanh recurrences s_t = tanh(Wx a_t + Wh s_{t-1} + b).

struct EncoderTrace {
  Tensor proj;                 // T x D after the input projection
  Tensor pooled;               // stride-2 pair means; empty when stride is 1
  std::vector<Tensor> states;  // recurrent layer outputs, each T' x D

  const Tensor& rnn_input() const { return pooled.size() ? pooled : proj; }
  const Tensor& top() const { return states.back(); }
};

EncoderTrace encoder_forward(const Model& m, const Tensor& x) {
  const ModelConfig& cfg = m.config;
  if (x.rank() != 2 || x.dim(1) != cfg.feature_dim) throw Error("feature matrix shape mismatch");
  if (x.dim(0) == 0) throw Error("empty input");
  const std::size_t T = x.dim(0);
  const std::size_t D = cfg.hidden_dim;
  const std::size_t F = cfg.feature_dim;

  EncoderTrace tr;
  const Tensor& w_in = m.params.at("enc.in.w").value;
  const Tensor& b_in = m.params.at("enc.in.b").value;
  tr.proj = Tensor({T, D});
  for (std::size_t t = 0; t < T; ++t) {
    double* row = tr.proj.data() + t * D;
    nn::linear(w_in.data(), b_in.data(), x.data() + t * F, row, D, F);
    nn::tanh_inplace(row, D);
  }

  const Tensor* cur = &tr.proj;
  if (cfg.encoder_stride == 2) {
    const std::size_t t2 = (T + 1) / 2;
    tr.pooled = Tensor({t2, D});
    for (std::size_t j = 0; j < t2; ++j) {
      const std::size_t first = 2 * j;
      const std::size_t group = std::min<std::size_t>(2, T - first);
      for (std::size_t i = 0; i < D; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < group; ++k) s += tr.proj(first + k, i);
        tr.pooled(j, i) = s / static_cast<double>(group);
      }
    }
    cur = &tr.pooled;
  }

  const std::size_t tp = cur->dim(0);
  tr.states.reserve(cfg.encoder_layers);
  for (std::size_t k = 0; k < cfg.encoder_layers; ++k) {
    const std::string base = "enc.rnn" + std::to_string(k) + ".";
    const Tensor& wx = m.params.at(base + "wx").value;
    const Tensor& wh = m.params.at(base + "wh").value;
    const Tensor& b = m.params.at(base + "b").value;
    Tensor s({tp, D});
    for (std::size_t t = 0; t < tp; ++t) {
      const double* in = cur->data() + t * D;
      const double* prev = t ? s.data() + (t - 1) * D : nullptr;
      double* out = s.data() + t * D;
      for (std::size_t i = 0; i < D; ++i) {
        double acc = b(i);
        const double* wxi = wx.data() + i * D;
        for (std::size_t j = 0; j < D; ++j) acc += wxi[j] * in[j];
        if (prev) {
          const double* whi = wh.data() + i * D;
          for (std::size_t j = 0; j < D; ++j) acc += whi[j] * prev[j];
        }
        out[i] = std::tanh(acc);
      }
    }
    tr.states.push_back(std::move(s));
    cur = &tr.states.back();
  }
  return tr;
}

void encoder_backward(const Model& m, const Tensor& x, const EncoderTrace& tr, Tensor dh,
                      GradSink& sink) {
  const ModelConfig& cfg = m.config;
  const std::size_t D = cfg.hidden_dim;
  const std::size_t F = cfg.feature_dim;
  const std::size_t T = x.dim(0);
  const std::size_t tp = tr.rnn_input().dim(0);

  Tensor d_cur = std::move(dh);
  std::vector<double> dpre(D), carry(D);
  for (std::size_t k = cfg.encoder_layers; k-- > 0;) {
    const std::string base = "enc.rnn" + std::to_string(k) + ".";
    const Tensor& wx = m.params.at(base + "wx").value;
    const Tensor& wh = m.params.at(base + "wh").value;
    const Tensor& s = tr.states[k];
    const Tensor& in = k ? tr.states[k - 1] : tr.rnn_input();
    Tensor& dwx = sink[base + "wx"];
    Tensor& dwh = sink[base + "wh"];
    Tensor& db = sink[base + "b"];
    Tensor d_in({tp, D});
    std::fill(carry.begin(), carry.end(), 0.0);
    for (std::size_t t = tp; t-- > 0;) {
      const double* st = s.data() + t * D;
      for (std::size_t i = 0; i < D; ++i) {
        const double ds = d_cur(t, i) + carry[i];
        dpre[i] = ds * (1.0 - st[i] * st[i]);
      }
      const double* in_t = in.data() + t * D;
      const double* prev = t ? s.data() + (t - 1) * D : nullptr;
      for (std::size_t i = 0; i < D; ++i) {
        const double g = dpre[i];
        db(i) += g;
        double* dwxi = dwx.data() + i * D;
        for (std::size_t j = 0; j < D; ++j) dwxi[j] += g * in_t[j];
        if (prev) {
          double* dwhi = dwh.data() + i * D;
          for (std::size_t j = 0; j < D; ++j) dwhi[j] += g * prev[j];
        }
      }
      double* din_t = d_in.data() + t * D;
      for (std::size_t j = 0; j < D; ++j) {
        double a = 0.0, c = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
          a += dpre[i] * wx(i, j);
          if (prev) c += dpre[i] * wh(i, j);
        }
        din_t[j] += a;
        carry[j] = c;  // gradient into s_{t-1}; stays zero at t = 0
      }
    }
    d_cur = std::move(d_in);
  }

  Tensor d_proj;
  if (cfg.encoder_stride == 2) {
    d_proj = Tensor({T, D});
    const std::size_t t2 = tr.pooled.dim(0);
    for (std::size_t j = 0; j < t2; ++j) {
      const std::size_t first = 2 * j;
      const std::size_t group = std::min<std::size_t>(2, T - first);
      const double inv = 1.0 / static_cast<double>(group);
      for (std::size_t i = 0; i < D; ++i)
        for (std::size_t k = 0; k < group; ++k) d_proj(first + k, i) += d_cur(j, i) * inv;
    }
  } else {
    d_proj = std::move(d_cur);
  }

  const Tensor& w_in = m.params.at("enc.in.w").value;
  Tensor& dw_in = sink["enc.in.w"];
  Tensor& db_in = sink["enc.in.b"];
  std::vector<double> dp(D);
  for (std::size_t t = 0; t < T; ++t) {
    const double* y = tr.proj.data() + t * D;
    for (std::size_t i = 0; i < D; ++i) dp[i] = d_proj(t, i) * (1.0 - y[i] * y[i]);
    nn::linear_backward(w_in.data(), x.data() + t * F, dp.data(), dw_in.data(), db_in.data(),
                        nullptr, D, F);
  }
}

// ---------------------------------------------------------------------------
// CTC head: per-frame linear V x D into a row-normalized log-softmax.

LogProbGrid head_forward(const Model& m, const Tensor& h) {
  const std::size_t tp = h.dim(0);
  const std::size_t D = h.dim(1);
  const std::size_t V = m.config.vocab;
  const Tensor& w = m.params.at("ctc.w").value;
  const Tensor& b = m.params.at("ctc.b").value;
  Tensor logits({tp, V});
  for (std::size_t t = 0; t < tp; ++t)
    nn::linear(w.data(), b.data(), h.data() + t * D, logits.data() + t * V, V, D);
  return log_softmax_rows(logits);
}

void head_backward(const Model& m, const Tensor& h, const LogProbGrid& grid, const Tensor& dgrid,
                   Tensor& dh, GradSink& sink) {
  const std::size_t tp = h.dim(0);
  const std::size_t D = h.dim(1);
  const std::size_t V = m.config.vocab;
  const Tensor& w = m.params.at("ctc.w").value;
  Tensor& dw = sink["ctc.w"];
  Tensor& db = sink["ctc.b"];
  std::vector<double> dlogit(V);
  for (std::size_t t = 0; t < tp; ++t) {
    std::fill(dlogit.begin(), dlogit.end(), 0.0);
    nn::log_softmax_backward(grid.tensor().data() + t * V, dgrid.data() + t * V, dlogit.data(), V);
    nn::linear_backward(w.data(), h.data() + t * D, dlogit.data(), dw.data(), db.data(),
                        dh.data() + t * D, V, D);
  }
}

// ---------------------------------------------------------------------------
// Prediction network: g_0 is a learned vector, g_u = tanh(Wx e(y_u) +
// Wh g_{u-1} + b). Row u conditions on the first u labels.

void decoder_step(const Model& m, const double* g_prev, TokenId tok, double* g_out) {
  const std::size_t D = m.config.hidden_dim;
  const Tensor& emb = m.params.at("dec.emb").value;
  const Tensor& wx = m.params.at("dec.wx").value;
  const Tensor& wh = m.params.at("dec.wh").value;
  const Tensor& b = m.params.at("dec.b").value;
  const double* e = emb.data() + static_cast<std::size_t>(tok) * D;
  for (std::size_t i = 0; i < D; ++i) {
    double acc = b(i);
    const double* wxi = wx.data() + i * D;
    const double* whi = wh.data() + i * D;
    for (std::size_t j = 0; j < D; ++j) acc += wxi[j] * e[j] + whi[j] * g_prev[j];
    g_out[i] = std::tanh(acc);
  }
}

Tensor decoder_forward(const Model& m, const TokenSeq& y) {
  const std::size_t D = m.config.hidden_dim;
  const std::size_t U = y.size();
  Tensor g({U + 1, D});
  const Tensor& g0 = m.params.at("dec.g0").value;
  for (std::size_t i = 0; i < D; ++i) g(0, i) = g0(i);
  for (std::size_t u = 1; u <= U; ++u)
    decoder_step(m, g.data() + (u - 1) * D, y[u - 1], g.data() + u * D);
  return g;
}

void decoder_backward(const Model& m, const TokenSeq& y, const Tensor& g, Tensor& dg,
                      GradSink& sink) {
  const std::size_t D = m.config.hidden_dim;
  const std::size_t U = y.size();
  const Tensor& emb = m.params.at("dec.emb").value;
  const Tensor& wx = m.params.at("dec.wx").value;
  const Tensor& wh = m.params.at("dec.wh").value;
  Tensor& demb = sink["dec.emb"];
  Tensor& dwx = sink["dec.wx"];
  Tensor& dwh = sink["dec.wh"];
  Tensor& db = sink["dec.b"];
  std::vector<double> dpre(D);
  for (std::size_t u = U; u >= 1; --u) {
    const double* gu = g.data() + u * D;
    const double* gp = g.data() + (u - 1) * D;
    const std::size_t tok = static_cast<std::size_t>(y[u - 1]);
    const double* e = emb.data() + tok * D;
    for (std::size_t i = 0; i < D; ++i) dpre[i] = dg(u, i) * (1.0 - gu[i] * gu[i]);
    double* de = demb.data() + tok * D;
    for (std::size_t i = 0; i < D; ++i) {
      const double gr = dpre[i];
      db(i) += gr;
      double* dwxi = dwx.data() + i * D;
      double* dwhi = dwh.data() + i * D;
      for (std::size_t j = 0; j < D; ++j) {
        dwxi[j] += gr * e[j];
        dwhi[j] += gr * gp[j];
      }
    }
    for (std::size_t j = 0; j < D; ++j) {
      double a = 0.0, c = 0.0;
      for (std::size_t i = 0; i < D; ++i) {
        a += dpre[i] * wx(i, j);
        c += dpre[i] * wh(i, j);
      }
      de[j] += a;
      dg(u - 1, j) += c;
    }
  }
  Tensor& dg0 = sink["dec.g0"];
  for (std::size_t i = 0; i < D; ++i) dg0(i) += dg(0, i);
}

// ---------------------------------------------------------------------------
// Joint: z = tanh(h + g + b), log-softmax over the head's classes.

void joint_row(const Model& m, const double* h, const double* g, double* z, double* lp,
               std::size_t classes) {
  const std::size_t D = m.config.hidden_dim;
  const Tensor& bj = m.params.at("joint.b").value;
  const Tensor& w = m.params.at("joint.w").value;
  const Tensor& ob = m.params.at("joint.out_b").value;
  for (std::size_t i = 0; i < D; ++i) z[i] = std::tanh(h[i] + g[i] + bj(i));
  nn::linear(w.data(), ob.data(), z, lp, classes, D);
  log_softmax_row(std::span<double>(lp, classes));
}

void joint_row_backward(const Model& m, const double* z, const double* lp, const double* dlp,
                        double* dh, double* dg, GradSink& sink, std::size_t classes) {
  const std::size_t D = m.config.hidden_dim;
  const Tensor& w = m.params.at("joint.w").value;
  Tensor& dw = sink["joint.w"];
  Tensor& dob = sink["joint.out_b"];
  Tensor& dbj = sink["joint.b"];
  std::vector<double> dlogit(classes, 0.0), dz(D, 0.0);
  nn::log_softmax_backward(lp, dlp, dlogit.data(), classes);
  nn::linear_backward(w.data(), z, dlogit.data(), dw.data(), dob.data(), dz.data(), classes, D);
  for (std::size_t i = 0; i < D; ++i) {
    const double t = dz[i] * (1.0 - z[i] * z[i]);
    dh[i] += t;
    dg[i] += t;
    dbj(i) += t;
  }
}

// ---------------------------------------------------------------------------
// Blank head: sigmoid(w2 . tanh(W1 [h_t; g_u; h_last] + b1) + b2).
// h_last is the encoder frame of the previous emission, or the learned
// initial vector before the first one.

struct BlankTrace {
  Tensor input;           // T' x in_dim
  Tensor q;               // T' x H hidden activations
  std::vector<double> p;  // posterior per frame
};

BlankTrace blank_forward(const Model& m, const Tensor& h, const Tensor& g,
                         const PairedFrames& pairing) {
  const ModelConfig& cfg = m.config;
  const std::size_t D = cfg.hidden_dim;
  const std::size_t H = cfg.blank_hidden;
  const std::size_t in_dim = blank_input_dim(cfg);
  const std::size_t tp = h.dim(0);
  const Tensor& w1 = m.params.at("blank.w1").value;
  const Tensor& b1 = m.params.at("blank.b1").value;
  const Tensor& w2 = m.params.at("blank.w2").value;
  const Tensor& b2 = m.params.at("blank.b2").value;

  BlankTrace tr;
  tr.input = Tensor({tp, in_dim});
  tr.q = Tensor({tp, H});
  tr.p.resize(tp);
  for (std::size_t t = 0; t < tp; ++t) {
    double* in = tr.input.data() + t * in_dim;
    const double* ht = h.data() + t * D;
    const double* gt = g.data() + pairing.decoder_state[t] * D;
    std::copy(ht, ht + D, in);
    std::copy(gt, gt + D, in + D);
    if (cfg.enhanced_blank) {
      const std::size_t l = pairing.last_emit[t];
      const double* hl = l == kNoEmission ? m.params.at("blank.h_init").value.data()
                                          : h.data() + l * D;
      std::copy(hl, hl + D, in + 2 * D);
    }
    double* qt = tr.q.data() + t * H;
    nn::linear(w1.data(), b1.data(), in, qt, H, in_dim);
    nn::tanh_inplace(qt, H);
    double acc = b2(0);
    for (std::size_t i = 0; i < H; ++i) acc += w2(i) * qt[i];
    tr.p[t] = nn::sigmoid(acc);
  }
  return tr;
}

// d_out[t] is dJ/d(pre-sigmoid logit). Inputs came through stop_gradient
// when truncation is on: only the blank head's own parameters (including
// the learned initial vector) receive gradient then.
void blank_backward(const Model& m, const BlankTrace& tr, const PairedFrames& pairing,
                    const std::vector<double>& d_out, Tensor& dh, Tensor& dg, GradSink& sink) {
  const ModelConfig& cfg = m.config;
  const std::size_t D = cfg.hidden_dim;
  const std::size_t H = cfg.blank_hidden;
  const std::size_t in_dim = blank_input_dim(cfg);
  const Tensor& w1 = m.params.at("blank.w1").value;
  const Tensor& w2 = m.params.at("blank.w2").value;
  Tensor& dw1 = sink["blank.w1"];
  Tensor& db1 = sink["blank.b1"];
  Tensor& dw2 = sink["blank.w2"];
  Tensor& db2 = sink["blank.b2"];
  const bool pass_through = !cfg.truncate_blank_grad;
  std::vector<double> dpre(H), din(in_dim);
  for (std::size_t t = 0; t < tr.p.size(); ++t) {
    const double go = d_out[t];
    if (go == 0.0) continue;
    const double* qt = tr.q.data() + t * H;
    db2(0) += go;
    for (std::size_t i = 0; i < H; ++i) {
      dw2(i) += go * qt[i];
      dpre[i] = go * w2(i) * (1.0 - qt[i] * qt[i]);
    }
    const double* in = tr.input.data() + t * in_dim;
    std::fill(din.begin(), din.end(), 0.0);
    nn::linear_backward(w1.data(), in, dpre.data(), dw1.data(), db1.data(), din.data(), H, in_dim);
    if (cfg.enhanced_blank && pairing.last_emit[t] == kNoEmission) {
      Tensor& dhi = sink["blank.h_init"];
      for (std::size_t i = 0; i < D; ++i) dhi(i) += din[2 * D + i];
    }
    if (pass_through) {
      for (std::size_t i = 0; i < D; ++i) dh(t, i) += din[i];
      const std::size_t u = pairing.decoder_state[t];
      for (std::size_t i = 0; i < D; ++i) dg(u, i) += din[D + i];
      const std::size_t l = pairing.last_emit[t];
      if (cfg.enhanced_blank && l != kNoEmission)
        for (std::size_t i = 0; i < D; ++i) dh(l, i) += din[2 * D + i];
    }
  }
}

double blank_posterior(const Model& m, const double* ht, const double* g,
                       const std::vector<double>& h_last) {
  const ModelConfig& cfg = m.config;
  const std::size_t D = cfg.hidden_dim;
  const std::size_t H = cfg.blank_hidden;
  const std::size_t in_dim = blank_input_dim(cfg);
  std::vector<double> in(in_dim), q(H);
  std::copy(ht, ht + D, in.begin());
  std::copy(g, g + D, in.begin() + D);
  if (cfg.enhanced_blank) std::copy(h_last.begin(), h_last.end(), in.begin() + 2 * D);
  const Tensor& w1 = m.params.at("blank.w1").value;
  const Tensor& b1 = m.params.at("blank.b1").value;
  const Tensor& w2 = m.params.at("blank.w2").value;
  const Tensor& b2 = m.params.at("blank.b2").value;
  nn::linear(w1.data(), b1.data(), in.data(), q.data(), H, in_dim);
  nn::tanh_inplace(q.data(), H);
  double acc = b2(0);
  for (std::size_t i = 0; i < H; ++i) acc += w2(i) * q[i];
  return nn::sigmoid(acc);
}

struct ItemWork {
  const Sample* sample = nullptr;
  bool feasible = true;
  EncoderTrace enc;
  LogProbGrid grid;
  AlignmentSpans spans;
  CompositeLoss comp;
  std::uint64_t activations = 0;
};

}  // namespace

Model make_model(const ModelConfig& config) {
  if (config.vocab < 2) throw Error("vocab must hold the blank and at least one token");
  if (config.blank < 0 || config.blank >= static_cast<TokenId>(config.vocab))
    throw Error("blank id out of range");
  if (config.encoder_stride != 1 && config.encoder_stride != 2)
    throw Error("encoder stride must be 1 or 2");
  if (config.encoder_layers == 0) throw Error("encoder needs at least one recurrent layer");
  if (config.feature_dim == 0 || config.hidden_dim == 0 || config.blank_hidden == 0)
    throw Error("model dims must be positive");

  Model m{config, {}};
  Rng rng(config.seed);
  ParamStore& P = m.params;
  const std::size_t D = config.hidden_dim;
  const std::size_t F = config.feature_dim;
  const std::size_t V = config.vocab;
  const std::size_t C = config.joint_classes();
  auto init = [&](Param& p, std::size_t fan_in) { P.init_uniform(p, fan_in, rng); };

  init(P.add("enc.in.w", {D, F}), F);
  init(P.add("enc.in.b", {D}), F);
  for (std::size_t k = 0; k < config.encoder_layers; ++k) {
    const std::string base = "enc.rnn" + std::to_string(k) + ".";
    init(P.add(base + "wx", {D, D}), D);
    init(P.add(base + "wh", {D, D}), D);
    init(P.add(base + "b", {D}), D);
  }
  init(P.add("ctc.w", {V, D}), D);
  init(P.add("ctc.b", {V}), D);
  init(P.add("dec.emb", {V, D}), D);
  init(P.add("dec.wx", {D, D}), D);
  init(P.add("dec.wh", {D, D}), D);
  init(P.add("dec.b", {D}), D);
  init(P.add("dec.g0", {D}), D);
  init(P.add("joint.b", {D}), D);
  init(P.add("joint.w", {C, D}), D);
  init(P.add("joint.out_b", {C}), D);
  if (uses_blank_net(config)) {
    const std::size_t in_dim = blank_input_dim(config);
    const std::size_t H = config.blank_hidden;
    init(P.add("blank.w1", {H, in_dim}), in_dim);
    init(P.add("blank.b1", {H}), in_dim);
    init(P.add("blank.w2", {H}), H);
    init(P.add("blank.b2", {1}), H);
    if (config.enhanced_blank) init(P.add("blank.h_init", {D}), D);
  }
  return m;
}

Tensor encode(const Model& model, const Tensor& features) {
  return encoder_forward(model, features).top();
}

LogProbGrid ctc_log_probs(const Model& model, const Tensor& features) {
  return head_forward(model, encoder_forward(model, features).top());
}

StepDiagnostics forward_backward_step(Model& model, std::span<const Sample> batch, unsigned terms,
                                      std::size_t threads,
                                      const std::vector<AlignmentSpans>* fixed_spans,
                                      std::vector<AlignmentSpans>* spans_out) {
  const ModelConfig& cfg = model.config;
  model.params.zero_grad();
  StepDiagnostics diag;
  if (batch.empty()) return diag;
  if (fixed_spans && fixed_spans->size() != batch.size())
    throw Error("fixed alignment count does not match the batch");

  for (const Sample& s : batch)
    for (TokenId tok : s.transcript) {
      if (tok < 0 || tok >= static_cast<TokenId>(cfg.vocab)) throw Error("token id out of range");
      if (tok == cfg.blank) throw Error("transcript contains the blank");
    }

  std::vector<ItemWork> items(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) items[i].sample = &batch[i];

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, items.size()));
  auto run_phase = [&](const std::function<void(std::size_t, std::size_t)>& body) {
    if (workers == 1) {
      for (std::size_t i = 0; i < items.size(); ++i) body(0, i);
      return;
    }
    std::vector<std::exception_ptr> errs(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        const std::size_t lo = w * items.size() / workers;
        const std::size_t hi = (w + 1) * items.size() / workers;
        try {
          for (std::size_t i = lo; i < hi; ++i) body(w, i);
        } catch (...) {
          errs[w] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  };

  // Phase 1: encoder + CTC head per item. Items are independent, so the
  // split across workers cannot change any value.
  run_phase([&](std::size_t, std::size_t i) {
    ItemWork& it = items[i];
    it.enc = encoder_forward(model, it.sample->features);
    it.grid = head_forward(model, it.enc.top());
    it.feasible = it.grid.frames() >= ctc_min_frames(it.sample->transcript);
  });

  std::size_t n_live = 0;
  for (const ItemWork& it : items) n_live += it.feasible;
  diag.infeasible = items.size() - n_live;
  if (spans_out) spans_out->assign(items.size(), {});
  if (n_live == 0) return diag;

  // Phase 2: alignment targets for the frame criterion, either batched
  // from the current head or reused from the caller.
  if (cfg.criterion == Criterion::kLightweight) {
    if (fixed_spans) {
      for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].feasible) items[i].spans = (*fixed_spans)[i];
    } else {
      std::vector<std::size_t> live;
      std::size_t t_max = 0;
      for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].feasible) {
          live.push_back(i);
          t_max = std::max(t_max, items[i].grid.frames());
        }
      BatchGrid bg;
      bg.data = Tensor({live.size(), t_max, cfg.vocab}, kLogZero);
      std::vector<TokenSeq> seqs;
      seqs.reserve(live.size());
      for (std::size_t n = 0; n < live.size(); ++n) {
        const ItemWork& it = items[live[n]];
        const std::size_t tp = it.grid.frames();
        std::copy(it.grid.tensor().data(), it.grid.tensor().data() + tp * cfg.vocab,
                  bg.data.data() + n * t_max * cfg.vocab);
        bg.lengths.push_back(tp);
        seqs.push_back(it.sample->transcript);
      }
      AlignResult ar =
          forced_align_batch(bg, TokenBatch::from_sequences(seqs), cfg.blank, cfg.align_mode);
      for (std::size_t n = 0; n < live.size(); ++n)
        items[live[n]].spans = ar.alignment.item_spans(n);
    }
    if (spans_out)
      for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].feasible) (*spans_out)[i] = items[i].spans;
  }

  // Phase 3: losses and the analytic backward, one gradient buffer per
  // worker. Buffers are reduced in worker order afterwards, so reruns
  // with the same worker count reproduce bit-identically.
  std::vector<GradSink> sinks;
  sinks.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) sinks.emplace_back(model.params);
  const double inv_n = 1.0 / static_cast<double>(n_live);
  const double lambda = cfg.loss.lambda;
  const std::size_t D = cfg.hidden_dim;
  const std::size_t V = cfg.vocab;

  run_phase([&](std::size_t w, std::size_t i) {
    ItemWork& it = items[i];
    if (!it.feasible) return;
    GradSink& sink = sinks[w];
    const TokenSeq& y = it.sample->transcript;
    const Tensor& h = it.enc.top();
    const std::size_t tp = it.grid.frames();
    const std::size_t U = y.size();
    const double u_norm = static_cast<double>(std::max<std::size_t>(U, 1));

    const double ctc_raw = ctc_forward(it.grid, y, cfg.blank).loss;
    const double ctc_n = ctc_raw / u_norm;

    if (cfg.criterion == Criterion::kTransducer) {
      Tensor g = decoder_forward(model, y);
      Tensor z({tp, U + 1, D});
      Tensor lp({tp, U + 1, V});
      for (std::size_t t = 0; t < tp; ++t)
        for (std::size_t u = 0; u <= U; ++u)
          joint_row(model, h.data() + t * D, g.data() + u * D, &z(t, u, 0), &lp(t, u, 0), V);
      it.activations = static_cast<std::uint64_t>(tp) * (U + 1) * V;

      const double lat_n = transducer_forward(lp, y, cfg.blank) / u_norm;
      it.comp.ctc = ctc_n;
      it.comp.nonblank = lat_n;
      it.comp.total = lambda * ctc_n + (1.0 - lambda) * lat_n;

      const double wc = (terms & kTermCtc) ? lambda * inv_n : 0.0;
      const double wt = (terms & kTermNonBlank) ? (1.0 - lambda) * inv_n : 0.0;
      Tensor dh({tp, D});
      Tensor dg({U + 1, D});
      if (wt != 0.0) {
        Tensor lat_grad = transducer_grad(lp, y, cfg.blank);
        const double scale = wt / u_norm;
        std::vector<double> dlp(V);
        for (std::size_t t = 0; t < tp; ++t)
          for (std::size_t u = 0; u <= U; ++u) {
            const double* gr = &lat_grad(t, u, 0);
            bool any = false;
            for (std::size_t k = 0; k < V; ++k) {
              dlp[k] = scale * gr[k];
              any = any || dlp[k] != 0.0;
            }
            if (!any) continue;
            joint_row_backward(model, &z(t, u, 0), &lp(t, u, 0), dlp.data(), dh.data() + t * D,
                               dg.data() + u * D, sink, V);
          }
      }
      decoder_backward(model, y, g, dg, sink);
      if (wc != 0.0) {
        Tensor dgrid = ctc_grad(it.grid, y, cfg.blank);
        const double scale = wc / u_norm;
        for (double& v : dgrid.values()) v *= scale;
        head_backward(model, h, it.grid, dgrid, dh, sink);
      }
      encoder_backward(model, it.sample->features, it.enc, std::move(dh), sink);
      return;
    }

    FrameLabels labels = collapse_alignment(it.spans, y, tp, cfg.blank);
    PairedFrames pairing = pair_frames(labels, cfg.blank);
    Tensor g = decoder_forward(model, y);

    const std::size_t C = cfg.joint_classes();
    Tensor z({tp, D});
    Tensor lp({tp, C});
    for (std::size_t t = 0; t < tp; ++t)
      joint_row(model, h.data() + t * D, g.data() + pairing.decoder_state[t] * D,
                z.data() + t * D, lp.data() + t * C, C);
    it.activations = static_cast<std::uint64_t>(tp) * C;

    double l_b = 0.0;
    NonBlankLoss nb;
    BlankTrace btr;
    if (cfg.decouple_blank) {
      btr = blank_forward(model, h, g, pairing);
      it.activations += tp;  // one blank posterior per frame
      l_b = blank_loss(btr.p, labels, cfg.blank);
      std::vector<double> p_nb(lp.values().size());
      for (std::size_t n = 0; n < p_nb.size(); ++n) p_nb[n] = std::exp(lp(n));
      nb = nonblank_loss(p_nb, C, labels, cfg.blank);
    } else {
      // Single softmax over the whole vocabulary; mean cross-entropy over
      // every frame stands in for the pair of decoupled losses.
      double total = 0.0;
      for (std::size_t t = 0; t < tp; ++t)
        total -= lp(t, static_cast<std::size_t>(labels[t]));
      nb.value = total / static_cast<double>(tp);
    }
    it.comp = composite_loss(ctc_n, l_b, nb.value, cfg.loss);

    const double wc = (terms & kTermCtc) ? (it.comp.gated ? 1.0 : lambda) * inv_n : 0.0;
    const double wnb =
        !it.comp.gated && (terms & kTermNonBlank) ? (1.0 - lambda) * inv_n : 0.0;
    const double wb =
        !it.comp.gated && (terms & kTermBlank) && cfg.decouple_blank ? inv_n : 0.0;

    Tensor dh({tp, D});
    Tensor dg({U + 1, D});

    if (wb != 0.0) {
      std::vector<double> d_out(tp);
      for (std::size_t t = 0; t < tp; ++t) {
        const double target = labels[t] == cfg.blank ? 1.0 : 0.0;
        d_out[t] = wb * (btr.p[t] - target) / static_cast<double>(tp);
      }
      blank_backward(model, btr, pairing, d_out, dh, dg, sink);
    }

    if (wnb != 0.0) {
      std::vector<double> dlp(C, 0.0);
      if (cfg.decouple_blank) {
        std::size_t nb_frames = 0;
        for (std::size_t t = 0; t < tp; ++t) nb_frames += labels[t] != cfg.blank;
        if (nb_frames > 0) {
          const double coef = -wnb / static_cast<double>(nb_frames);
          for (std::size_t t = 0; t < tp; ++t) {
            if (labels[t] == cfg.blank) continue;
            const std::size_t cls = nonblank_class(labels[t], cfg.blank);
            dlp[cls] = coef;
            joint_row_backward(model, z.data() + t * D, lp.data() + t * C, dlp.data(),
                               dh.data() + t * D, dg.data() + pairing.decoder_state[t] * D, sink,
                               C);
            dlp[cls] = 0.0;
          }
        }
      } else {
        const double coef = -wnb / static_cast<double>(tp);
        for (std::size_t t = 0; t < tp; ++t) {
          const auto cls = static_cast<std::size_t>(labels[t]);
          dlp[cls] = coef;
          joint_row_backward(model, z.data() + t * D, lp.data() + t * C, dlp.data(),
                             dh.data() + t * D, dg.data() + pairing.decoder_state[t] * D, sink, C);
          dlp[cls] = 0.0;
        }
      }
    }

    decoder_backward(model, y, g, dg, sink);

    if (wc != 0.0) {
      Tensor dgrid = ctc_grad(it.grid, y, cfg.blank);
      const double scale = wc / u_norm;
      for (double& v : dgrid.values()) v *= scale;
      head_backward(model, h, it.grid, dgrid, dh, sink);
    }
    encoder_backward(model, it.sample->features, it.enc, std::move(dh), sink);
  });

  for (const GradSink& s : sinks) s.add_to(model.params);

  std::size_t gated = 0;
  for (const ItemWork& it : items) {
    if (!it.feasible) continue;
    diag.loss += it.comp.total;
    diag.ctc += it.comp.ctc;
    diag.blank += it.comp.blank;
    diag.nonblank += it.comp.nonblank;
    gated += it.comp.gated;
    diag.joint_activations += it.activations;
  }
  diag.loss *= inv_n;
  diag.ctc *= inv_n;
  diag.blank *= inv_n;
  diag.nonblank *= inv_n;
  diag.gated_frac = static_cast<double>(gated) * inv_n;
  return diag;
}

TokenSeq greedy_decode(const Model& model, const Tensor& h) {
  const ModelConfig& cfg = model.config;
  if (h.rank() != 2 || h.dim(1) != cfg.hidden_dim) throw Error("encoder output shape mismatch");
  const std::size_t tp = h.dim(0);
  const std::size_t D = cfg.hidden_dim;
  const std::size_t C = cfg.joint_classes();
  const bool blank_net = uses_blank_net(cfg);

  std::vector<double> g(D), g_next(D), z(D), lp(C);
  const Tensor& g0 = model.params.at("dec.g0").value;
  std::copy(g0.data(), g0.data() + D, g.begin());
  std::vector<double> h_last;
  if (blank_net && cfg.enhanced_blank) {
    const Tensor& hi = model.params.at("blank.h_init").value;
    h_last.assign(hi.data(), hi.data() + D);
  }

  TokenSeq out;
  for (std::size_t t = 0; t < tp; ++t) {
    const double* ht = h.data() + t * D;
    bool emit = false;
    TokenId tok = cfg.blank;
    if (blank_net) {
      const double p_b = blank_posterior(model, ht, g.data(), h_last);
      if (cfg.loss.blank_decision_combined_argmax) {
        joint_row(model, ht, g.data(), z.data(), lp.data(), C);
        std::vector<double> p_nb(C);
        for (std::size_t k = 0; k < C; ++k) p_nb[k] = std::exp(lp[k]);
        const std::vector<double> combined = combine_distribution(p_b, p_nb, cfg.blank);
        const auto best = static_cast<TokenId>(argmax(combined.data(), combined.size()));
        if (best != cfg.blank) {
          emit = true;
          tok = best;
        }
      } else if (p_b < cfg.loss.blank_threshold) {
        joint_row(model, ht, g.data(), z.data(), lp.data(), C);
        emit = true;
        tok = nonblank_token(argmax(lp.data(), C), cfg.blank);
      }
    } else {
      joint_row(model, ht, g.data(), z.data(), lp.data(), C);
      const auto best = static_cast<TokenId>(argmax(lp.data(), C));
      if (best != cfg.blank) {
        emit = true;
        tok = best;
      }
    }
    if (emit) {
      out.push_back(tok);
      decoder_step(model, g.data(), tok, g_next.data());
      g.swap(g_next);
      if (blank_net && cfg.enhanced_blank) h_last.assign(ht, ht + D);
    }
  }
  return out;
}

TokenSeq decode_features(const Model& model, const Tensor& features) {
  return greedy_decode(model, encode(model, features));
}

GradCheckReport grad_check(Model& model, const std::function<double(Model&)>& forward_loss,
                           const std::function<void(Model&)>& backward, double eps) {
  backward(model);
  std::vector<Tensor> analytic;
  analytic.reserve(model.params.count());
  for (const Param& p : model.params.all()) analytic.push_back(p.grad);

  GradCheckReport report;
  for (std::size_t pi = 0; pi < model.params.count(); ++pi) {
    Param& p = model.params.all()[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value(i);
      p.value(i) = orig + eps;
      const double up = forward_loss(model);
      p.value(i) = orig - eps;
      const double down = forward_loss(model);
      p.value(i) = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double exact = analytic[pi](i);
      const double denom = std::max({std::abs(numeric), std::abs(exact), 1e-8});
      const double rel = std::abs(numeric - exact) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p.name;
      }
    }
  }
  return report;
}

}  // namespace lt
