#pragma once

#include "curvedit/eig.hpp"
#include "curvedit/matrix.hpp"
#include "curvedit/nn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace curvedit {

/// Second-moment factors for one projection: A over the inputs,
/// G over the output-side gradients, normalized by the number of
/// contributing positions at finalize().
class KfacFactors {
public:
  KfacFactors() = default;
  KfacFactors(std::string layer_name, std::size_t d_in, std::size_t d_out);

  /// A += a^T a, G += g^T g, positions_seen += rows. Both operands must
  /// have the same row count (one row per position).
  void accumulate(const Matrix& activations, const Matrix& gradients);

  /// Merges partial sums from another accumulator over the same shapes.
  void merge(const KfacFactors& other);

  /// Divides both sums by positions_seen and eigendecomposes (eigenvalues
  /// clamped at >= 0). Idempotent once called.
  void finalize();

  const std::string& layer_name() const { return name_; }
  bool finalized() const { return finalized_; }
  std::uint64_t positions_seen() const { return positions_; }
  const Matrix& a() const { return a_; }
  const Matrix& g() const { return g_; }
  const SymEig& eig_a() const;  // eigenvalues mu
  const SymEig& eig_g() const;  // eigenvalues lambda

  void save(const std::string& path) const;
  static KfacFactors load(const std::string& path);

private:
  std::string name_;
  Matrix a_, g_;
  std::uint64_t positions_ = 0;
  bool finalized_ = false;
  SymEig eig_a_, eig_g_;
};

/// One Kronecker eigen-pair: G-eigindex i, A-eigindex j, mass lambda_i*mu_j.
struct KronPair {
  std::size_t i, j;
  double mass;
};

/// All d_in*d_out pair masses sorted descending, ties broken
/// lexicographically by (i, j); total_mass = (sum lambda)(sum mu).
struct KronSpectrum {
  std::vector<KronPair> pairs;
  double total_mass = 0.0;
};

KronSpectrum kron_spectrum(const KfacFactors& factors);

/// Explicit Kronecker product kron(G, A) (small dims only; used to check
/// the pair-mass spectrum against a directly formed Fisher block).
Matrix kronecker_product(const Matrix& g, const Matrix& a);

/// For a single linear softmax layer on a tiny dataset, compares the exact
/// empirical Fisher (per-example flattened gradient outer products, label
/// expectation taken exhaustively under the model distribution) against
/// the factored G (x) A. Returns ||F - G(x)A||_F / ||F||_F. Flattening is
/// row-major over W (d_out x d_in), matching kron(G, A).
double kfac_vs_exact_fisher_check(const Matrix& weights, const Matrix& inputs);

/// Runs forward/backward over the given lm sequences with the stated label
/// mode and accumulates finalized factors for every gate/up/down
/// projection. The last position of each sequence is excluded.
std::vector<KfacFactors> collect_lm_factors(const ModelCheckpoint& model,
                                            const std::vector<std::vector<int>>& sequences,
                                            LabelMode mode, std::uint64_t seed);

/// Same for the classifier over a batch of examples. Labels are only
/// consulted in GroundTruth mode.
std::vector<KfacFactors> collect_classifier_factors(const ModelCheckpoint& model, const Matrix& x,
                                                    LabelMode mode, std::uint64_t seed,
                                                    const std::vector<int>* labels = nullptr);

const KfacFactors& find_factors(const std::vector<KfacFactors>& all, const std::string& name);

}  // namespace curvedit
