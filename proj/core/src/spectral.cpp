#include "curvedit/spectral.hpp"

#include "curvedit/svd.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace curvedit {

void BandSpec::validate() const {
  if (bands.empty()) throw std::invalid_argument("BandSpec: no bands");
  double cursor = 0.0;
  for (const auto& [lo, hi] : bands) {
    if (lo != cursor) throw std::invalid_argument("BandSpec: bands must be disjoint and covering");
    if (hi <= lo || hi > 100.0) throw std::invalid_argument("BandSpec: band bounds out of range");
    cursor = hi;
  }
  if (cursor != 100.0) throw std::invalid_argument("BandSpec: bands must cover (0,100]");
}

std::pair<std::size_t, std::size_t> BandSpec::band_indices(std::pair<double, double> band,
                                                           std::size_t n) {
  const auto lo = static_cast<std::size_t>(
      std::llround(band.first / 100.0 * static_cast<double>(n)));
  const auto hi = static_cast<std::size_t>(
      std::llround(band.second / 100.0 * static_cast<double>(n)));
  return {lo, hi};
}

double band_projection_magnitude(const Matrix& activations, const Matrix& basis,
                                 std::pair<std::size_t, std::size_t> index_range) {
  if (activations.rows() == 0)
    throw std::invalid_argument("band_projection_magnitude: empty activation set");
  if (activations.cols() != basis.rows())
    throw DimensionError("band_projection_magnitude: activation/basis dim mismatch");
  const auto [lo, hi] = index_range;
  if (hi <= lo || hi > basis.cols())
    throw std::invalid_argument("band_projection_magnitude: empty or out-of-range band");

  // coefficients = activations * basis; only columns [lo, hi) are needed
  double total = 0.0;
  for (std::size_t r = 0; r < activations.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t c = lo; c < hi; ++c) {
      double coeff = 0.0;
      for (std::size_t k = 0; k < activations.cols(); ++k)
        coeff += activations(r, k) * basis(k, c);
      sq += coeff * coeff;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(activations.rows());
}

std::vector<std::pair<std::string, Matrix>> collect_lm_projection_inputs(
    const ModelCheckpoint& model, const std::vector<std::vector<int>>& sequences) {
  if (sequences.empty())
    throw std::invalid_argument("collect_lm_projection_inputs: empty sequence set");
  const std::size_t layers = model.arch.n_layers;
  const std::size_t d = model.arch.d_model;
  std::size_t total_positions = 0;
  for (const auto& s : sequences) total_positions += s.size() - 1;

  std::vector<std::pair<std::string, Matrix>> out;
  out.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i)
    out.emplace_back("layer" + std::to_string(i) + ".gate", Matrix(total_positions, d));

  std::size_t row = 0;
  for (const auto& seq : sequences) {
    const LmForward fwd = lm_forward(model, seq);
    for (std::size_t i = 0; i < layers; ++i) {
      const Matrix& src = fwd.layers[i].mlp_norm;
      for (std::size_t r = 0; r + 1 < src.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c) out[i].second(row + r, c) = src(r, c);
    }
    row += seq.size() - 1;
  }
  return out;
}

BandReport activation_ratio_report(const ModelCheckpoint& model,
                                   const std::vector<KfacFactors>& factors,
                                   const std::vector<std::vector<int>>& mem_set,
                                   const std::vector<std::vector<int>>& clean_set,
                                   const BandSpec& spec,
                                   const std::vector<std::string>& projection_names) {
  spec.validate();
  if (mem_set.empty() || clean_set.empty())
    throw std::invalid_argument("activation_ratio_report: empty dataset");

  const auto mem_inputs = collect_lm_projection_inputs(model, mem_set);
  const auto clean_inputs = collect_lm_projection_inputs(model, clean_set);
  const std::string basis_name = spec.basis == BandSpec::Basis::KfacA ? "kfac_a" : "svd_right";

  BandReport report;
  for (const auto& proj : projection_names) {
    const Matrix* mem_acts = nullptr;
    const Matrix* clean_acts = nullptr;
    for (std::size_t i = 0; i < mem_inputs.size(); ++i) {
      if (mem_inputs[i].first == proj) {
        mem_acts = &mem_inputs[i].second;
        clean_acts = &clean_inputs[i].second;
      }
    }
    if (mem_acts == nullptr)
      throw std::out_of_range("activation_ratio_report: no activations for " + proj);

    Matrix basis;
    if (spec.basis == BandSpec::Basis::KfacA) {
      basis = find_factors(factors, proj).eig_a().eigenvectors;  // ordered by mu descending
    } else {
      // right singular vectors of the weight, as columns, by s descending
      basis = transpose(svd(model.tensor(proj)).vt);
    }

    for (const auto& band : spec.bands) {
      const auto idx = BandSpec::band_indices(band, basis.cols());
      const double mem_mag = band_projection_magnitude(*mem_acts, basis, idx);
      const double clean_mag = band_projection_magnitude(*clean_acts, basis, idx);
      if (!(clean_mag > 0.0))
        throw NumericError("activation_ratio_report: zero clean magnitude for " + proj);
      report.push_back(
          {proj, basis_name, band.first, band.second, mem_mag, clean_mag, mem_mag / clean_mag});
    }
  }
  return report;
}

std::string band_report_csv(const BandReport& report) {
  std::ostringstream os;
  os << "layer,basis,band_lo,band_hi,mem_mag,clean_mag,ratio\n";
  os.precision(12);
  for (const auto& r : report) {
    os << r.layer << "," << r.basis << "," << r.lo_pct << "," << r.hi_pct << "," << r.mem_mag
       << "," << r.clean_mag << "," << r.ratio << "\n";
  }
  return os.str();
}

}  // namespace curvedit
