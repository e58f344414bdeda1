#pragma once

#include "curvedit/kfac.hpp"
#include "curvedit/matrix.hpp"
#include "curvedit/nn.hpp"

#include <string>
#include <vector>

namespace curvedit {

/// Percentile bands over an ordered set of basis vectors, by count.
/// (0,10] means the top 10% of vectors in the chosen ordering.
struct BandSpec {
  enum class Basis { KfacA, SvdRight };
  Basis basis = Basis::KfacA;
  std::vector<std::pair<double, double>> bands = {{0, 10}, {10, 25}, {25, 50}, {50, 100}};

  void validate() const;  // bands disjoint and covering (0,100]
  /// Vector index range [lo, hi) for a band over n ordered vectors.
  static std::pair<std::size_t, std::size_t> band_indices(std::pair<double, double> band,
                                                          std::size_t n);
};

struct BandRow {
  std::string layer;
  std::string basis;
  double lo_pct, hi_pct;
  double mem_mag, clean_mag, ratio;
};

using BandReport = std::vector<BandRow>;

/// Mean over positions of the l2 norm of the coefficient sub-vector that
/// falls in the band. `basis` columns must be orthonormal and already
/// ordered (by mu or singular value, descending).
double band_projection_magnitude(const Matrix& activations, const Matrix& basis,
                                 std::pair<std::size_t, std::size_t> index_range);

/// Collects the inputs feeding each layer's gate/up projection (the
/// post-norm hidden state) over a set of lm sequences, keyed by
/// "layer{i}.gate". The last sequence position is excluded, matching the
/// factor statistics.
std::vector<std::pair<std::string, Matrix>> collect_lm_projection_inputs(
    const ModelCheckpoint& model, const std::vector<std::vector<int>>& sequences);

/// Memorized-vs-clean activation ratio per (layer, band) for the named
/// projections. Basis per layer: eigenvectors of A ordered by mu
/// (KfacA) or right singular vectors of the weight (SvdRight).
BandReport activation_ratio_report(const ModelCheckpoint& model,
                                   const std::vector<KfacFactors>& factors,
                                   const std::vector<std::vector<int>>& mem_set,
                                   const std::vector<std::vector<int>>& clean_set,
                                   const BandSpec& spec,
                                   const std::vector<std::string>& projection_names);

std::string band_report_csv(const BandReport& report);

}  // namespace curvedit
