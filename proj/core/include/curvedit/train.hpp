#pragma once

#include "curvedit/nn.hpp"

#include <vector>

namespace curvedit {

struct LmDataset {
  std::vector<std::vector<int>> sequences;
};

struct ClassifierDataset {
  Matrix x;                 // N x input_dim
  std::vector<int> labels;  // N
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  std::vector<double> loss_history;  // mean per-position / per-example NLL per step
};

/// Minibatch training with SGD or AdamW; deterministic given cfg.seed.
/// Throws NumericError naming the step index if the loss diverges.
TrainResult train_lm(const ArchSpec& arch, const LmDataset& data, const TrainConfig& cfg);
TrainResult train_classifier(const ArchSpec& arch, const ClassifierDataset& data,
                             const TrainConfig& cfg);

/// Continues training from existing weights (used by tests and sweeps).
TrainResult train_lm_from(ModelCheckpoint model, const LmDataset& data, const TrainConfig& cfg);

}  // namespace curvedit
