#include "curvedit/editing.hpp"

#include "curvedit/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace curvedit {

void EditPlan::validate() const {
  if (targets.empty()) throw std::invalid_argument("EditPlan: targets must be nonempty");
  switch (method) {
    case Method::KfacPairs:
      if (!(rho > 0.0 && rho <= 1.0))
        throw std::invalid_argument("EditPlan: rho must be in (0, 1]");
      break;
    case Method::SvdTruncate:
      if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
        throw std::invalid_argument("EditPlan: keep_fraction must be in (0, 1]");
      break;
    case Method::BsnMask:
      if (!(bsn.sparsity_ratio > 0.0 && bsn.sparsity_ratio <= 0.5))
        throw std::invalid_argument("EditPlan: sparsity_ratio must be in (0, 0.5]");
      if (!(bsn.loss_weight >= 0.0 && bsn.loss_weight <= 1.0))
        throw std::invalid_argument("EditPlan: loss_weight must be in [0, 1]");
      break;
  }
}

Json EditPlan::to_json() const {
  Json j;
  j["method"] = method == Method::KfacPairs    ? "kfac_pairs"
                : method == Method::SvdTruncate ? "svd_truncate"
                                                : "bsn_mask";
  j["targets"] = targets;
  j["rho"] = rho;
  j["keep_fraction"] = keep_fraction;
  j["bsn"] = {{"sparsity_ratio", bsn.sparsity_ratio},
              {"loss_weight", bsn.loss_weight},
              {"epochs", bsn.epochs},
              {"lr", bsn.lr},
              {"seed", bsn.seed}};
  return j;
}

EditPlan EditPlan::from_json(const Json& j) {
  EditPlan p;
  const std::string m = j.at("method").get<std::string>();
  if (m == "kfac_pairs") {
    p.method = Method::KfacPairs;
  } else if (m == "svd_truncate") {
    p.method = Method::SvdTruncate;
  } else if (m == "bsn_mask") {
    p.method = Method::BsnMask;
  } else {
    throw std::invalid_argument("EditPlan: unknown method " + m);
  }
  p.targets = j.at("targets").get<std::vector<std::string>>();
  p.rho = j.value("rho", p.rho);
  p.keep_fraction = j.value("keep_fraction", p.keep_fraction);
  if (j.contains("bsn")) {
    const Json& b = j["bsn"];
    p.bsn.sparsity_ratio = b.value("sparsity_ratio", p.bsn.sparsity_ratio);
    p.bsn.loss_weight = b.value("loss_weight", p.bsn.loss_weight);
    p.bsn.epochs = b.value("epochs", p.bsn.epochs);
    p.bsn.lr = b.value("lr", p.bsn.lr);
    p.bsn.seed = b.value("seed", p.bsn.seed);
  }
  p.validate();
  return p;
}

Json EditOutcome::summary_json() const {
  Json rows = Json::array();
  for (const auto& s : per_layer) {
    rows.push_back({{"layer", s.layer},
                    {"retained_mass_fraction", s.retained_mass_fraction},
                    {"pairs_kept", s.pairs_kept},
                    {"rank_kept", s.rank_kept},
                    {"mask_density", s.mask_density}});
  }
  return Json{{"per_layer", rows}};
}

KfacEditResult kfac_pair_edit(const Matrix& w, const KfacFactors& factors, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("kfac_pair_edit: rho out of range");
  const SymEig& eg = factors.eig_g();
  const SymEig& ea = factors.eig_a();
  if (w.rows() != eg.eigenvalues.size() || w.cols() != ea.eigenvalues.size())
    throw DimensionError("kfac_pair_edit: W shape does not match factors for " +
                         factors.layer_name());

  const KronSpectrum spectrum = kron_spectrum(factors);
  if (!(spectrum.total_mass > 0.0))
    throw NumericError("kfac_pair_edit: degenerate curvature (zero total mass) for " +
                       factors.layer_name());

  const Matrix& ug = eg.eigenvectors;
  const Matrix& ua = ea.eigenvectors;
  const Matrix coeff = matmul(matmul(transpose(ug), w), ua);

  Matrix mask(w.rows(), w.cols());
  double kept_mass = 0.0;
  std::size_t kept = 0;
  const double threshold = rho * spectrum.total_mass;
  for (const KronPair& pair : spectrum.pairs) {
    if (rho < 1.0 && kept_mass >= threshold) break;
    mask(pair.i, pair.j) = 1.0;
    kept_mass += pair.mass;
    ++kept;
  }

  KfacEditResult result;
  result.edited = matmul(matmul(ug, hadamard(coeff, mask)), transpose(ua));
  result.pairs_kept = kept;
  result.retained_mass_fraction = kept_mass / spectrum.total_mass;
  return result;
}

Matrix svd_truncate_edit(const Matrix& w, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("svd_truncate_edit: keep_fraction out of range");
  const Svd dec = svd(w);
  const std::size_t k = dec.singular_values.size();
  const auto rank =
      static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(k)));
  Matrix out(w.rows(), w.cols());
  for (std::size_t r = 0; r < std::min(rank, k); ++r) {
    const double s = dec.singular_values[r];
    for (std::size_t i = 0; i < w.rows(); ++i)
      for (std::size_t j = 0; j < w.cols(); ++j) out(i, j) += s * dec.u(i, r) * dec.vt(r, j);
  }
  return out;
}

EditOutcome apply_weight_edit(const ModelCheckpoint& model, const std::vector<KfacFactors>& factors,
                              const EditPlan& plan) {
  plan.validate();
  if (plan.method == EditPlan::Method::BsnMask)
    throw std::invalid_argument("apply_weight_edit: bsn_mask needs forget/retain sets");
  EditOutcome outcome;
  outcome.edited = model;
  for (const std::string& target : plan.targets) {
    Matrix& w = outcome.edited.tensor(target);
    LayerEditStats stats;
    stats.layer = target;
    if (plan.method == EditPlan::Method::KfacPairs) {
      const KfacEditResult r = kfac_pair_edit(w, find_factors(factors, target), plan.rho);
      w = r.edited;
      stats.pairs_kept = r.pairs_kept;
      stats.retained_mass_fraction = r.retained_mass_fraction;
    } else {
      w = svd_truncate_edit(w, plan.keep_fraction);
      stats.rank_kept = static_cast<std::size_t>(
          std::ceil(plan.keep_fraction * static_cast<double>(std::min(w.rows(), w.cols()))));
    }
    outcome.per_layer.push_back(std::move(stats));
  }
  return outcome;
}

namespace {

struct ScoredParam {
  std::size_t tensor;  // index into target tensor list
  std::size_t flat;
};

}  // namespace

EditOutcome bsn_mask_edit(const ModelCheckpoint& model,
                          const std::vector<std::vector<int>>& forget_set,
                          const std::vector<std::vector<int>>& retain_set, const EditPlan& plan) {
  plan.validate();
  if (plan.method != EditPlan::Method::BsnMask)
    throw std::invalid_argument("bsn_mask_edit: plan method is not bsn_mask");
  if (forget_set.empty() || retain_set.empty())
    throw std::invalid_argument("bsn_mask_edit: forget and retain sets must be nonempty");
  const BsnParams& bp = plan.bsn;

  // Per-target score tensors; mask recomputed from scores every step.
  Rng rng(bp.seed);
  std::vector<Matrix> scores;
  std::size_t total_params = 0;
  for (const auto& name : plan.targets) {
    const Matrix& w = model.tensor(name);
    Matrix s(w.rows(), w.cols());
    for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] = 0.01 * rng.next_normal();
    total_params += s.size();
    scores.push_back(std::move(s));
  }
  const auto n_zero = static_cast<std::size_t>(
      std::llround(bp.sparsity_ratio * static_cast<double>(total_params)));

  const auto build_masked = [&](ModelCheckpoint& masked) {
    // bottom-k scores across all targets get zeroed
    std::vector<std::pair<double, ScoredParam>> flat;
    flat.reserve(total_params);
    for (std::size_t t = 0; t < scores.size(); ++t)
      for (std::size_t i = 0; i < scores[t].size(); ++i)
        flat.push_back({scores[t].data()[i], {t, i}});
    std::nth_element(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n_zero), flat.end(),
                     [](const auto& a, const auto& b) {
                       if (a.first != b.first) return a.first < b.first;
                       if (a.second.tensor != b.second.tensor) return a.second.tensor < b.second.tensor;
                       return a.second.flat < b.second.flat;
                     });
    masked = model;
    for (std::size_t i = 0; i < n_zero; ++i) {
      const ScoredParam& p = flat[i].second;
      masked.tensor(plan.targets[p.tensor]).data()[p.flat] = 0.0;
    }
  };

  // Adam state over scores.
  std::vector<Matrix> m1, m2;
  for (const auto& s : scores) {
    m1.emplace_back(s.rows(), s.cols());
    m2.emplace_back(s.rows(), s.cols());
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  std::size_t step_count = 0;
  ModelCheckpoint masked;
  for (std::size_t epoch = 0; epoch < bp.epochs; ++epoch) {
    build_masked(masked);
    NamedTensors grads = make_zero_checkpoint(model.arch).tensors;
    double obj = 0.0;

    // retain: descend CE; forget: ascend CE
    for (const auto& seq : retain_set) {
      const LmForward fwd = lm_forward(masked, seq);
      obj += lm_backward(masked, fwd, seq, LabelMode::GroundTruth, nullptr,
                         bp.loss_weight / static_cast<double>(retain_set.size()), grads);
    }
    for (const auto& seq : forget_set) {
      const LmForward fwd = lm_forward(masked, seq);
      obj -= lm_backward(masked, fwd, seq, LabelMode::GroundTruth, nullptr,
                         -(1.0 - bp.loss_weight) / static_cast<double>(forget_set.size()), grads);
    }
    if (!std::isfinite(obj)) throw NumericError("bsn_mask_edit: diverged at epoch " +
                                                std::to_string(epoch));

    // Straight-through: d(score) = d(masked W) * W
    ++step_count;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
    for (std::size_t t = 0; t < plan.targets.size(); ++t) {
      const Matrix& w = model.tensor(plan.targets[t]);
      const Matrix& gw = named_tensor(grads, plan.targets[t]);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double g = gw.data()[i] * w.data()[i];
        m1[t].data()[i] = b1 * m1[t].data()[i] + (1.0 - b1) * g;
        m2[t].data()[i] = b2 * m2[t].data()[i] + (1.0 - b2) * g * g;
        scores[t].data()[i] -= bp.lr * (m1[t].data()[i] / bc1) /
                               (std::sqrt(m2[t].data()[i] / bc2) + eps);
      }
    }
  }

  EditOutcome outcome;
  build_masked(outcome.edited);
  for (std::size_t t = 0; t < plan.targets.size(); ++t) {
    const Matrix& w = outcome.edited.tensor(plan.targets[t]);
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < w.size(); ++i) nonzero += (w.data()[i] != 0.0);
    LayerEditStats stats;
    stats.layer = plan.targets[t];
    stats.mask_density = static_cast<double>(nonzero) / static_cast<double>(w.size());
    outcome.per_layer.push_back(std::move(stats));
  }
  return outcome;
}

}  // namespace curvedit
