#pragma once

#include "curvedit/kfac.hpp"
#include "curvedit/matrix.hpp"
#include "curvedit/nn.hpp"

#include <string>
#include <vector>

namespace curvedit {

struct BsnParams {
  double sparsity_ratio = 0.01;  // fraction of target parameters zeroed
  double loss_weight = 0.7;      // retain-loss weight; forget gets (1 - w), ascended
  std::size_t epochs = 5;
  double lr = 0.05;
  std::uint64_t seed = 7;
};

/// Per-layer edit specification. Targets name projection tensors
/// ("layer{i}.gate" etc.); strength is rho for kfac_pairs, keep_fraction
/// for svd_truncate, BsnParams for bsn_mask.
struct EditPlan {
  enum class Method { KfacPairs, SvdTruncate, BsnMask };
  Method method = Method::KfacPairs;
  std::vector<std::string> targets;
  double rho = 0.6;
  double keep_fraction = 0.5;
  BsnParams bsn;

  void validate() const;
  Json to_json() const;
  static EditPlan from_json(const Json& j);
};

struct LayerEditStats {
  std::string layer;
  double retained_mass_fraction = 0.0;
  std::size_t pairs_kept = 0;   // kfac_pairs
  std::size_t rank_kept = 0;    // svd_truncate
  double mask_density = 1.0;    // bsn_mask (fraction of parameters kept)
};

struct EditOutcome {
  ModelCheckpoint edited;
  std::vector<LayerEditStats> per_layer;

  Json summary_json() const;
};

struct KfacEditResult {
  Matrix edited;
  std::size_t pairs_kept = 0;
  double retained_mass_fraction = 0.0;
};

/// Expresses W in the factor eigenbases (C = U_G^T W U_A), keeps the
/// minimal descending-mass prefix of pairs whose cumulative curvature
/// mass reaches rho of the total (ties lexicographic by (i,j); rho = 1
/// keeps every pair), zeroes the rest, and maps back. Throws NumericError
/// when a factor has zero total mass.
KfacEditResult kfac_pair_edit(const Matrix& w, const KfacFactors& factors, double rho);

/// Keeps the top ceil(keep_fraction * min(rows, cols)) singular triples.
Matrix svd_truncate_edit(const Matrix& w, double keep_fraction);

/// Simplified BalancedSubnet: learns per-parameter scores on the target
/// projections through a straight-through top-k binarization that zeroes
/// the sparsity_ratio fraction of lowest-score parameters, optimizing
/// loss_weight * CE(retain) - (1 - loss_weight) * CE(forget). Returns the
/// checkpoint with the final hard mask applied.
EditOutcome bsn_mask_edit(const ModelCheckpoint& model,
                          const std::vector<std::vector<int>>& forget_set,
                          const std::vector<std::vector<int>>& retain_set, const EditPlan& plan);

/// Applies a kfac_pairs or svd_truncate plan tensor-by-tensor.
EditOutcome apply_weight_edit(const ModelCheckpoint& model, const std::vector<KfacFactors>& factors,
                              const EditPlan& plan);

}  // namespace curvedit
