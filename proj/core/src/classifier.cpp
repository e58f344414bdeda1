#include "curvedit/nn.hpp"

#include "nn_common.hpp"

#include <cmath>

namespace curvedit {

using detail::linear;
using detail::linear_backward;
using detail::rmsnorm_backward;
using detail::rmsnorm_forward;

ClassifierForward classifier_forward(const ModelCheckpoint& model, const Matrix& x) {
  const ArchSpec& arch = model.arch;
  if (x.cols() != arch.input_dim)
    throw DimensionError("classifier_forward: input dim " + std::to_string(x.cols()) +
                         " != " + std::to_string(arch.input_dim));
  x.require_finite("classifier_forward input");

  ClassifierForward f;
  f.h0 = linear(x, model.tensor("embed"));
  Matrix h = f.h0;
  f.blocks.resize(arch.n_blocks);
  for (std::size_t bi = 0; bi < arch.n_blocks; ++bi) {
    const std::string p = "layer" + std::to_string(bi) + ".";
    ClassifierBlockActs& acts = f.blocks[bi];
    acts.norm_in = rmsnorm_forward(h, acts.rms);
    acts.gate_pre = linear(acts.norm_in, model.tensor(p + "gate"));
    acts.up_pre = linear(acts.norm_in, model.tensor(p + "up"));
    acts.act = Matrix(acts.gate_pre.rows(), acts.gate_pre.cols());
    for (std::size_t i = 0; i < acts.act.size(); ++i)
      acts.act.data()[i] = silu(acts.gate_pre.data()[i]) * acts.up_pre.data()[i];
    acts.h_out = add(h, linear(acts.act, model.tensor(p + "down")));
    if (!acts.h_out.all_finite())
      throw NumericError("classifier_forward: non-finite values at " + p + "block");
    h = acts.h_out;
  }
  f.logits = linear(h, model.tensor("head"));
  f.logits.require_finite("classifier logits");
  return f;
}

double classifier_backward(const ModelCheckpoint& model, const ClassifierForward& fwd,
                           const Matrix& x, const std::vector<int>& labels, LabelMode mode,
                           Rng* rng, double grad_scale, NamedTensors& grad_accum,
                           std::vector<ProjectionTap>* taps) {
  const ArchSpec& arch = model.arch;
  const std::size_t n = x.rows();
  const Matrix probs = softmax_rows(fwd.logits);

  std::vector<int> used(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (mode == LabelMode::GroundTruth) {
      used[r] = labels.at(r);
    } else {
      if (rng == nullptr) throw std::invalid_argument("model_sampled labels need an rng");
      used[r] = static_cast<int>(rng->sample_discrete(probs.data() + r * probs.cols(), probs.cols()));
    }
  }

  double loss = 0.0;
  Matrix dlogits(n, arch.n_classes);
  for (std::size_t r = 0; r < n; ++r) {
    const auto y = static_cast<std::size_t>(used[r]);
    loss -= std::log(std::max(probs(r, y), 1e-300));
    for (std::size_t c = 0; c < arch.n_classes; ++c)
      dlogits(r, c) = grad_scale * (probs(r, c) - (c == y ? 1.0 : 0.0));
  }

  const Matrix& h_last = arch.n_blocks > 0 ? fwd.blocks.back().h_out : fwd.h0;
  Matrix dh = linear_backward(h_last, model.tensor("head"), dlogits,
                              named_tensor(grad_accum, "head"));

  for (std::size_t bi = arch.n_blocks; bi-- > 0;) {
    const std::string p = "layer" + std::to_string(bi) + ".";
    const ClassifierBlockActs& acts = fwd.blocks[bi];

    const Matrix& d_block_out = dh;
    Matrix dact = linear_backward(acts.act, model.tensor(p + "down"), d_block_out,
                                  named_tensor(grad_accum, p + "down"));
    Matrix dgate_pre(dact.rows(), dact.cols());
    Matrix dup_pre(dact.rows(), dact.cols());
    for (std::size_t i = 0; i < dact.size(); ++i) {
      const double g = acts.gate_pre.data()[i];
      dup_pre.data()[i] = dact.data()[i] * silu(g);
      dgate_pre.data()[i] = dact.data()[i] * acts.up_pre.data()[i] * silu_grad(g);
    }
    if (taps != nullptr) {
      taps->push_back({p + "gate", acts.norm_in, dgate_pre});
      taps->push_back({p + "up", acts.norm_in, dup_pre});
      taps->push_back({p + "down", acts.act, d_block_out});
    }
    Matrix dnorm = linear_backward(acts.norm_in, model.tensor(p + "gate"), dgate_pre,
                                   named_tensor(grad_accum, p + "gate"));
    dnorm = add(dnorm, linear_backward(acts.norm_in, model.tensor(p + "up"), dup_pre,
                                       named_tensor(grad_accum, p + "up")));
    dh = add(dh, rmsnorm_backward(dnorm, acts.norm_in, acts.rms));
  }

  // dh is now the gradient at h0 = x * embed^T
  linear_backward(x, model.tensor("embed"), dh, named_tensor(grad_accum, "embed"));
  if (!std::isfinite(loss)) throw NumericError("classifier_backward: non-finite loss");
  return loss;
}

}  // namespace curvedit
