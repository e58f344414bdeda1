#include "curvedit/nn.hpp"

#include "nn_common.hpp"

#include <algorithm>
#include <cmath>

namespace curvedit {

using detail::drop_last_row;
using detail::linear;
using detail::linear_backward;
using detail::rmsnorm_backward;
using detail::rmsnorm_forward;

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double m = logits(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) m = std::max(m, logits(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      p(r, c) = std::exp(logits(r, c) - m);
      z += p(r, c);
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) p(r, c) /= z;
  }
  return p;
}

Matrix& named_tensor(NamedTensors& t, const std::string& name) {
  for (auto& [n, m] : t) {
    if (n == name) return m;
  }
  throw std::out_of_range("named_tensor: no tensor " + name);
}

void init_weights(ModelCheckpoint& model, Rng& rng, double scale) {
  for (auto& [name, t] : model.tensors) {
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = scale * rng.next_normal();
  }
}

namespace {

Matrix col_block(const Matrix& m, std::size_t c0, std::size_t c1) {
  Matrix out(m.rows(), c1 - c0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = c0; c < c1; ++c) out(r, c - c0) = m(r, c);
  return out;
}

void add_col_block(Matrix& dst, const Matrix& src, std::size_t c0) {
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, c0 + c) += src(r, c);
}

void check_finite(const Matrix& m, const std::string& where) {
  if (!m.all_finite()) throw NumericError("lm_forward: non-finite values at " + where);
}

// Sampled or ground-truth next-token labels for positions 0..L-2, plus the
// softmax of the logits (needed for dlogits either way).
struct LossTargets {
  std::vector<int> labels;
  Matrix probs;
};

LossTargets next_token_targets(const Matrix& logits, const std::vector<int>& tokens,
                               LabelMode mode, Rng* rng) {
  LossTargets t;
  t.probs = softmax_rows(logits);
  const std::size_t positions = tokens.size() - 1;
  t.labels.resize(positions);
  for (std::size_t i = 0; i < positions; ++i) {
    if (mode == LabelMode::GroundTruth) {
      t.labels[i] = tokens[i + 1];
    } else {
      if (rng == nullptr) throw std::invalid_argument("model_sampled labels need an rng");
      t.labels[i] =
          static_cast<int>(rng->sample_discrete(t.probs.data() + i * t.probs.cols(), t.probs.cols()));
    }
  }
  return t;
}

}  // namespace

LmForward lm_forward(const ModelCheckpoint& model, const std::vector<int>& tokens) {
  const ArchSpec& arch = model.arch;
  const std::size_t L = tokens.size();
  if (L < 2) throw DimensionError("lm_forward: need at least 2 tokens");
  if (L > arch.context) throw DimensionError("lm_forward: sequence exceeds context length");
  for (int tok : tokens) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= arch.vocab)
      throw DimensionError("lm_forward: token id out of vocab");
  }
  const std::size_t d = arch.d_model;
  const std::size_t heads = arch.n_heads;
  const std::size_t head_dim = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(head_dim));

  const Matrix& embed = model.tensor("embed");
  const Matrix& pos = model.tensor("pos");

  LmForward f;
  f.h0 = Matrix(L, d);
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t c = 0; c < d; ++c)
      f.h0(t, c) = embed(static_cast<std::size_t>(tokens[t]), c) + pos(t, c);

  Matrix h = f.h0;
  f.layers.resize(arch.n_layers);
  for (std::size_t li = 0; li < arch.n_layers; ++li) {
    const std::string p = "layer" + std::to_string(li) + ".";
    LmLayerActs& acts = f.layers[li];

    acts.attn_norm = rmsnorm_forward(h, acts.attn_rms);
    acts.q = linear(acts.attn_norm, model.tensor(p + "attn.wq"));
    acts.k = linear(acts.attn_norm, model.tensor(p + "attn.wk"));
    acts.v = linear(acts.attn_norm, model.tensor(p + "attn.wv"));

    acts.ctx = Matrix(L, d);
    acts.att_probs.resize(heads);
    for (std::size_t hi = 0; hi < heads; ++hi) {
      const Matrix qh = col_block(acts.q, hi * head_dim, (hi + 1) * head_dim);
      const Matrix kh = col_block(acts.k, hi * head_dim, (hi + 1) * head_dim);
      const Matrix vh = col_block(acts.v, hi * head_dim, (hi + 1) * head_dim);
      Matrix scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
      for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = i + 1; j < L; ++j) scores(i, j) = -1e30;  // causal mask
      acts.att_probs[hi] = softmax_rows(scores);
      add_col_block(acts.ctx, matmul(acts.att_probs[hi], vh), hi * head_dim);
    }
    const Matrix attn_out = linear(acts.ctx, model.tensor(p + "attn.wo"));
    acts.h_mid = add(h, attn_out);

    acts.mlp_norm = rmsnorm_forward(acts.h_mid, acts.mlp_rms);
    acts.gate_pre = linear(acts.mlp_norm, model.tensor(p + "gate"));
    acts.up_pre = linear(acts.mlp_norm, model.tensor(p + "up"));
    acts.act = Matrix(L, arch.d_mlp);
    for (std::size_t i = 0; i < acts.act.size(); ++i)
      acts.act.data()[i] = silu(acts.gate_pre.data()[i]) * acts.up_pre.data()[i];
    const Matrix mlp_out = linear(acts.act, model.tensor(p + "down"));
    acts.h_out = add(acts.h_mid, mlp_out);
    check_finite(acts.h_out, p + "block");
    h = acts.h_out;
  }

  f.final_norm = rmsnorm_forward(h, f.final_rms);
  f.logits = linear(f.final_norm, model.tensor("unembed"));
  check_finite(f.logits, "logits");
  return f;
}

double lm_backward(const ModelCheckpoint& model, const LmForward& fwd,
                   const std::vector<int>& tokens, LabelMode mode, Rng* rng, double grad_scale,
                   NamedTensors& grad_accum, std::vector<ProjectionTap>* taps) {
  const ArchSpec& arch = model.arch;
  const std::size_t L = tokens.size();
  const std::size_t d = arch.d_model;
  const std::size_t heads = arch.n_heads;
  const std::size_t head_dim = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(head_dim));

  const LossTargets targets = next_token_targets(fwd.logits, tokens, mode, rng);
  double loss = 0.0;
  Matrix dlogits(L, arch.vocab);
  for (std::size_t t = 0; t + 1 < L; ++t) {
    const int y = targets.labels[t];
    loss -= std::log(std::max(targets.probs(t, static_cast<std::size_t>(y)), 1e-300));
    for (std::size_t c = 0; c < arch.vocab; ++c)
      dlogits(t, c) = grad_scale * (targets.probs(t, c) -
                                    (static_cast<std::size_t>(y) == c ? 1.0 : 0.0));
  }
  // final position carries no next-token loss; dlogits row stays zero

  Matrix df_norm = linear_backward(fwd.final_norm, model.tensor("unembed"), dlogits,
                                   named_tensor(grad_accum, "unembed"));
  Matrix dh = rmsnorm_backward(df_norm, fwd.final_norm, fwd.final_rms);

  for (std::size_t li = arch.n_layers; li-- > 0;) {
    const std::string p = "layer" + std::to_string(li) + ".";
    const LmLayerActs& acts = fwd.layers[li];

    // MLP
    const Matrix& d_mlp_out = dh;  // residual passthrough keeps dh for h_mid too
    Matrix dact = linear_backward(acts.act, model.tensor(p + "down"), d_mlp_out,
                                  named_tensor(grad_accum, p + "down"));
    Matrix dgate_pre(L, arch.d_mlp);
    Matrix dup_pre(L, arch.d_mlp);
    for (std::size_t i = 0; i < dact.size(); ++i) {
      const double g = acts.gate_pre.data()[i];
      dup_pre.data()[i] = dact.data()[i] * silu(g);
      dgate_pre.data()[i] = dact.data()[i] * acts.up_pre.data()[i] * silu_grad(g);
    }
    if (taps != nullptr) {
      taps->push_back({p + "gate", drop_last_row(acts.mlp_norm), drop_last_row(dgate_pre)});
      taps->push_back({p + "up", drop_last_row(acts.mlp_norm), drop_last_row(dup_pre)});
      taps->push_back({p + "down", drop_last_row(acts.act), drop_last_row(d_mlp_out)});
    }
    Matrix dmlp_norm = linear_backward(acts.mlp_norm, model.tensor(p + "gate"), dgate_pre,
                                       named_tensor(grad_accum, p + "gate"));
    dmlp_norm = add(dmlp_norm, linear_backward(acts.mlp_norm, model.tensor(p + "up"), dup_pre,
                                               named_tensor(grad_accum, p + "up")));
    Matrix dh_mid = add(dh, rmsnorm_backward(dmlp_norm, acts.mlp_norm, acts.mlp_rms));

    // Attention
    Matrix dctx = linear_backward(acts.ctx, model.tensor(p + "attn.wo"), dh_mid,
                                  named_tensor(grad_accum, p + "attn.wo"));
    Matrix dq(L, d), dk(L, d), dv(L, d);
    for (std::size_t hi = 0; hi < heads; ++hi) {
      const Matrix qh = col_block(acts.q, hi * head_dim, (hi + 1) * head_dim);
      const Matrix kh = col_block(acts.k, hi * head_dim, (hi + 1) * head_dim);
      const Matrix vh = col_block(acts.v, hi * head_dim, (hi + 1) * head_dim);
      const Matrix dctx_h = col_block(dctx, hi * head_dim, (hi + 1) * head_dim);
      const Matrix& probs = acts.att_probs[hi];

      Matrix dprobs = matmul(dctx_h, transpose(vh));
      Matrix dvh = matmul(transpose(probs), dctx_h);
      Matrix dscores(L, L);
      for (std::size_t i = 0; i < L; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j <= i; ++j) dot += dprobs(i, j) * probs(i, j);
        for (std::size_t j = 0; j <= i; ++j)
          dscores(i, j) = probs(i, j) * (dprobs(i, j) - dot);
      }
      add_col_block(dq, scale(matmul(dscores, kh), inv_sqrt_dh), hi * head_dim);
      add_col_block(dk, scale(matmul(transpose(dscores), qh), inv_sqrt_dh), hi * head_dim);
      add_col_block(dv, dvh, hi * head_dim);
    }
    Matrix dattn_norm = linear_backward(acts.attn_norm, model.tensor(p + "attn.wq"), dq,
                                        named_tensor(grad_accum, p + "attn.wq"));
    dattn_norm = add(dattn_norm, linear_backward(acts.attn_norm, model.tensor(p + "attn.wk"), dk,
                                                 named_tensor(grad_accum, p + "attn.wk")));
    dattn_norm = add(dattn_norm, linear_backward(acts.attn_norm, model.tensor(p + "attn.wv"), dv,
                                                 named_tensor(grad_accum, p + "attn.wv")));
    dh = add(dh_mid, rmsnorm_backward(dattn_norm, acts.attn_norm, acts.attn_rms));
  }

  Matrix& dembed = named_tensor(grad_accum, "embed");
  Matrix& dpos = named_tensor(grad_accum, "pos");
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t c = 0; c < d; ++c) {
      dembed(static_cast<std::size_t>(tokens[t]), c) += dh(t, c);
      dpos(t, c) += dh(t, c);
    }
  }
  if (!std::isfinite(loss)) throw NumericError("lm_backward: non-finite loss");
  return loss;
}

std::vector<int> greedy_decode(const ModelCheckpoint& model, const std::vector<int>& prefix,
                               std::size_t n_tokens) {
  if (prefix.size() + n_tokens > model.arch.context)
    throw DimensionError("greedy_decode: prefix + generation exceeds context");
  std::vector<int> seq = prefix;
  std::vector<int> out;
  out.reserve(n_tokens);
  for (std::size_t step = 0; step < n_tokens; ++step) {
    const LmForward f = lm_forward(model, seq);
    const std::size_t last = seq.size() - 1;
    int best = 0;
    double best_v = f.logits(last, 0);
    for (std::size_t c = 1; c < model.arch.vocab; ++c) {
      if (f.logits(last, c) > best_v) {
        best_v = f.logits(last, c);
        best = static_cast<int>(c);
      }
    }
    out.push_back(best);
    seq.push_back(best);
  }
  return out;
}

std::pair<double, std::size_t> lm_sequence_nll(const ModelCheckpoint& model,
                                               const std::vector<int>& tokens) {
  const LmForward f = lm_forward(model, tokens);
  const Matrix probs = softmax_rows(f.logits);
  double nll = 0.0;
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    nll -= std::log(std::max(probs(t, static_cast<std::size_t>(tokens[t + 1])), 1e-300));
  }
  return {nll, tokens.size() - 1};
}

}  // namespace curvedit
