#pragma once

#include "curvedit/checkpoint.hpp"
#include "curvedit/matrix.hpp"
#include "curvedit/rng.hpp"

#include <string>
#include <utility>
#include <vector>

namespace curvedit {

using NamedTensors = std::vector<std::pair<std::string, Matrix>>;

Matrix& named_tensor(NamedTensors& t, const std::string& name);

/// Labels used for the backward pass. ModelSampled draws one label per
/// position from the model's own softmax, which is what makes the
/// gradient second moments Fisher statistics rather than empirical ones.
enum class LabelMode { GroundTruth, ModelSampled };

/// Per-projection buffer captured during forward/backward: the exact
/// input rows seen by a projection and the gradients on its output side.
/// For the lm the final sequence position is excluded from both.
struct ProjectionTap {
  std::string name;
  Matrix inputs;     // positions x d_in
  Matrix out_grads;  // positions x d_out
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  enum class Optimizer { Sgd, AdamW } optimizer = Optimizer::AdamW;
  /// Cosine decays the step size to 5% of learning_rate over `steps`,
  /// which freezes late-run churn (needed for stable verbatim recall).
  enum class Schedule { Constant, Cosine } schedule = Schedule::Constant;

  Json to_json() const;
  static TrainConfig from_json(const Json& j);
};

// ---------------------------------------------------------------------------
// Language model: decoder-only transformer, pre-RMSNorm, gated MLP
// down(silu(gate(x)) * up(x)), learned absolute positional embeddings.
// Activations are (positions x features) matrices; a projection W of
// shape (d_out x d_in) acts as y = x W^T.
// ---------------------------------------------------------------------------

struct LmLayerActs {
  Matrix attn_norm;                // input to attention, post-norm
  std::vector<double> attn_rms;    // per-position rms used by the norm
  Matrix q, k, v;
  std::vector<Matrix> att_probs;   // per head, L x L
  Matrix ctx;                      // concatenated head outputs
  Matrix h_mid;                    // after attention residual
  Matrix mlp_norm;                 // input to gate/up (K-FAC activation buffer)
  std::vector<double> mlp_rms;
  Matrix gate_pre, up_pre, act;    // act = silu(gate_pre) * up_pre, input to down
  Matrix h_out;
};

struct LmForward {
  Matrix h0;
  std::vector<LmLayerActs> layers;
  Matrix final_norm;
  std::vector<double> final_rms;
  Matrix logits;  // L x vocab
};

LmForward lm_forward(const ModelCheckpoint& model, const std::vector<int>& tokens);

/// Backpropagates next-token cross-entropy through the whole model,
/// accumulating parameter gradients into grad_accum (which must hold the
/// model's tensor layout). dlogits rows are scaled by grad_scale; the last
/// position carries no loss. Returns the summed per-position NLL of the
/// labels actually used. When taps is non-null, one ProjectionTap per
/// gate/up/down projection is appended (final position excluded).
double lm_backward(const ModelCheckpoint& model, const LmForward& fwd,
                   const std::vector<int>& tokens, LabelMode mode, Rng* rng, double grad_scale,
                   NamedTensors& grad_accum, std::vector<ProjectionTap>* taps = nullptr);

std::vector<int> greedy_decode(const ModelCheckpoint& model, const std::vector<int>& prefix,
                               std::size_t n_tokens);

/// Summed next-token NLL over positions 0..L-2 plus the position count.
std::pair<double, std::size_t> lm_sequence_nll(const ModelCheckpoint& model,
                                               const std::vector<int>& tokens);

// ---------------------------------------------------------------------------
// Classifier: embed -> n_blocks of residual pre-norm gated MLP -> head.
// ---------------------------------------------------------------------------

struct ClassifierBlockActs {
  Matrix norm_in;
  std::vector<double> rms;
  Matrix gate_pre, up_pre, act;
  Matrix h_out;
};

struct ClassifierForward {
  Matrix h0;
  std::vector<ClassifierBlockActs> blocks;
  Matrix logits;  // N x classes
};

ClassifierForward classifier_forward(const ModelCheckpoint& model, const Matrix& x);

/// Cross-entropy backward over a batch; labels per row (GroundTruth) or
/// drawn from the model softmax (ModelSampled). Returns summed NLL.
double classifier_backward(const ModelCheckpoint& model, const ClassifierForward& fwd,
                           const Matrix& x, const std::vector<int>& labels, LabelMode mode,
                           Rng* rng, double grad_scale, NamedTensors& grad_accum,
                           std::vector<ProjectionTap>* taps = nullptr);

// Shared numerics.
Matrix softmax_rows(const Matrix& logits);
double silu(double x);
double silu_grad(double x);

/// Fills every weight tensor with scaled normal noise; deterministic in
/// the rng state.
void init_weights(ModelCheckpoint& model, Rng& rng, double scale = 0.05);

}  // namespace curvedit
