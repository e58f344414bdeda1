#include "curvedit/kfac.hpp"

#include "curvedit/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace curvedit {

KfacFactors::KfacFactors(std::string layer_name, std::size_t d_in, std::size_t d_out)
    : name_(std::move(layer_name)), a_(d_in, d_in), g_(d_out, d_out) {}

void KfacFactors::accumulate(const Matrix& activations, const Matrix& gradients) {
  if (finalized_) throw std::logic_error("KfacFactors: accumulate after finalize");
  if (activations.rows() != gradients.rows())
    throw DimensionError("KfacFactors: position count mismatch between a and g");
  if (activations.cols() != a_.rows() || gradients.cols() != g_.rows())
    throw DimensionError("KfacFactors: feature dims do not match factors for " + name_);
  const std::uint64_t rows = activations.rows();
  if (positions_ > UINT64_MAX - rows)
    throw std::overflow_error("KfacFactors: position counter overflow");
  a_ = add(a_, matmul(transpose(activations), activations));
  g_ = add(g_, matmul(transpose(gradients), gradients));
  positions_ += rows;
}

void KfacFactors::merge(const KfacFactors& other) {
  if (finalized_ || other.finalized_) throw std::logic_error("KfacFactors: merge after finalize");
  if (other.a_.rows() != a_.rows() || other.g_.rows() != g_.rows())
    throw DimensionError("KfacFactors: merge shape mismatch");
  a_ = add(a_, other.a_);
  g_ = add(g_, other.g_);
  positions_ += other.positions_;
}

void KfacFactors::finalize() {
  if (finalized_) return;
  if (positions_ == 0) throw std::logic_error("KfacFactors: finalize with no positions");
  const double inv = 1.0 / static_cast<double>(positions_);
  a_ = scale(a_, inv);
  g_ = scale(g_, inv);
  eig_a_ = sym_eig(a_, /*clamp_nonnegative=*/true);
  eig_g_ = sym_eig(g_, /*clamp_nonnegative=*/true);
  finalized_ = true;
}

const SymEig& KfacFactors::eig_a() const {
  if (!finalized_) throw std::logic_error("KfacFactors: factors not finalized");
  return eig_a_;
}

const SymEig& KfacFactors::eig_g() const {
  if (!finalized_) throw std::logic_error("KfacFactors: factors not finalized");
  return eig_g_;
}

void KfacFactors::save(const std::string& path) const {
  if (!finalized_) throw std::logic_error("KfacFactors: save before finalize");
  Json header;
  header["layer"] = name_;
  header["positions_seen"] = positions_;
  const auto row_vector = [](const std::vector<double>& v) {
    Matrix m(1, v.size());
    for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = v[i];
    return m;
  };
  save_container(path, header,
                 {{"A", a_},
                  {"G", g_},
                  {"eigvals_a", row_vector(eig_a_.eigenvalues)},
                  {"eigvecs_a", eig_a_.eigenvectors},
                  {"eigvals_g", row_vector(eig_g_.eigenvalues)},
                  {"eigvecs_g", eig_g_.eigenvectors}});
}

KfacFactors KfacFactors::load(const std::string& path) {
  const Container c = load_container(path);
  KfacFactors f;
  f.name_ = c.header.at("layer").get<std::string>();
  f.positions_ = c.header.at("positions_seen").get<std::uint64_t>();
  f.a_ = c.tensor("A");
  f.g_ = c.tensor("G");
  const auto to_vector = [](const Matrix& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
  };
  f.eig_a_ = {to_vector(c.tensor("eigvals_a")), c.tensor("eigvecs_a")};
  f.eig_g_ = {to_vector(c.tensor("eigvals_g")), c.tensor("eigvecs_g")};
  f.finalized_ = true;
  return f;
}

KronSpectrum kron_spectrum(const KfacFactors& factors) {
  const SymEig& eg = factors.eig_g();
  const SymEig& ea = factors.eig_a();
  KronSpectrum s;
  s.pairs.reserve(eg.eigenvalues.size() * ea.eigenvalues.size());
  double sum_lambda = 0.0, sum_mu = 0.0;
  for (double l : eg.eigenvalues) sum_lambda += l;
  for (double m : ea.eigenvalues) sum_mu += m;
  s.total_mass = sum_lambda * sum_mu;
  for (std::size_t i = 0; i < eg.eigenvalues.size(); ++i)
    for (std::size_t j = 0; j < ea.eigenvalues.size(); ++j)
      s.pairs.push_back({i, j, eg.eigenvalues[i] * ea.eigenvalues[j]});
  std::sort(s.pairs.begin(), s.pairs.end(), [](const KronPair& x, const KronPair& y) {
    if (x.mass != y.mass) return x.mass > y.mass;
    if (x.i != y.i) return x.i < y.i;
    return x.j < y.j;
  });
  return s;
}

Matrix kronecker_product(const Matrix& g, const Matrix& a) {
  Matrix out(g.rows() * a.rows(), g.cols() * a.cols());
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t l = 0; l < a.cols(); ++l)
          out(i * a.rows() + k, j * a.cols() + l) = g(i, j) * a(k, l);
  return out;
}

double kfac_vs_exact_fisher_check(const Matrix& weights, const Matrix& inputs) {
  const std::size_t classes = weights.rows();
  const std::size_t dim = weights.cols();
  const std::size_t n = inputs.rows();
  if (dim > 8 || classes > 4 || n > 64)
    throw std::invalid_argument("kfac_vs_exact_fisher_check: dims exceed guardrail");
  if (inputs.cols() != dim) throw DimensionError("kfac_vs_exact_fisher_check: input dim mismatch");
  if (n == 0) throw std::invalid_argument("kfac_vs_exact_fisher_check: empty dataset");

  const std::size_t p = classes * dim;
  Matrix fisher(p, p);
  Matrix a_sum(dim, dim);
  Matrix g_sum(classes, classes);

  const Matrix logits = matmul(inputs, transpose(weights));
  const Matrix probs = softmax_rows(logits);
  for (std::size_t ex = 0; ex < n; ++ex) {
    Matrix a_n(dim, dim);
    for (std::size_t r = 0; r < dim; ++r)
      for (std::size_t c = 0; c < dim; ++c) a_n(r, c) = inputs(ex, r) * inputs(ex, c);

    // G_n = sum_y p_y (p - e_y)(p - e_y)^T, label expectation exact
    Matrix g_n(classes, classes);
    for (std::size_t y = 0; y < classes; ++y) {
      const double py = probs(ex, y);
      for (std::size_t r = 0; r < classes; ++r) {
        const double gr = probs(ex, r) - (r == y ? 1.0 : 0.0);
        for (std::size_t c = 0; c < classes; ++c) {
          const double gc = probs(ex, c) - (c == y ? 1.0 : 0.0);
          g_n(r, c) += py * gr * gc;
        }
      }
    }
    // Per-example Fisher block factorizes exactly: G_n (x) A_n.
    fisher = add(fisher, kronecker_product(g_n, a_n));
    a_sum = add(a_sum, a_n);
    g_sum = add(g_sum, g_n);
  }
  const double inv = 1.0 / static_cast<double>(n);
  fisher = scale(fisher, inv);
  const Matrix approx = kronecker_product(scale(g_sum, inv), scale(a_sum, inv));
  return frobenius_norm(sub(fisher, approx)) / std::max(frobenius_norm(fisher), 1e-300);
}

namespace {

std::vector<KfacFactors> make_projection_factors(const ArchSpec& arch) {
  std::vector<KfacFactors> out;
  const std::size_t layers =
      arch.kind == ArchSpec::Kind::Lm ? arch.n_layers : arch.n_blocks;
  const std::size_t d_in = arch.kind == ArchSpec::Kind::Lm ? arch.d_model : arch.d_hidden;
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    out.emplace_back(p + "gate", d_in, arch.d_mlp);
    out.emplace_back(p + "up", d_in, arch.d_mlp);
    out.emplace_back(p + "down", arch.d_mlp, d_in);
  }
  return out;
}

KfacFactors* find_mut(std::vector<KfacFactors>& all, const std::string& name) {
  for (auto& f : all) {
    if (f.layer_name() == name) return &f;
  }
  return nullptr;
}

}  // namespace

const KfacFactors& find_factors(const std::vector<KfacFactors>& all, const std::string& name) {
  for (const auto& f : all) {
    if (f.layer_name() == name) return f;
  }
  throw std::out_of_range("find_factors: no factors for " + name);
}

std::vector<KfacFactors> collect_lm_factors(const ModelCheckpoint& model,
                                            const std::vector<std::vector<int>>& sequences,
                                            LabelMode mode, std::uint64_t seed) {
  std::vector<KfacFactors> factors = make_projection_factors(model.arch);
  Rng rng(seed);
  NamedTensors grads = make_zero_checkpoint(model.arch).tensors;
  for (const auto& seq : sequences) {
    const LmForward fwd = lm_forward(model, seq);
    std::vector<ProjectionTap> taps;
    lm_backward(model, fwd, seq, mode, &rng, 1.0, grads, &taps);
    for (const auto& tap : taps) {
      KfacFactors* f = find_mut(factors, tap.name);
      if (f == nullptr) throw std::logic_error("collect_lm_factors: unexpected tap " + tap.name);
      f->accumulate(tap.inputs, tap.out_grads);
    }
  }
  for (auto& f : factors) f.finalize();
  return factors;
}

std::vector<KfacFactors> collect_classifier_factors(const ModelCheckpoint& model, const Matrix& x,
                                                    LabelMode mode, std::uint64_t seed,
                                                    const std::vector<int>* labels) {
  if (mode == LabelMode::GroundTruth && labels == nullptr)
    throw std::invalid_argument("collect_classifier_factors: ground_truth mode needs labels");
  std::vector<KfacFactors> factors = make_projection_factors(model.arch);
  Rng rng(seed);
  NamedTensors grads = make_zero_checkpoint(model.arch).tensors;
  const ClassifierForward fwd = classifier_forward(model, x);
  std::vector<ProjectionTap> taps;
  const std::vector<int> unused(x.rows(), 0);
  classifier_backward(model, fwd, x, labels != nullptr ? *labels : unused, mode, &rng, 1.0, grads,
                      &taps);
  for (const auto& tap : taps) {
    KfacFactors* f = find_mut(factors, tap.name);
    if (f == nullptr) throw std::logic_error("collect_classifier_factors: unexpected tap");
    f->accumulate(tap.inputs, tap.out_grads);
  }
  for (auto& f : factors) f.finalize();
  return factors;
}

}  // namespace curvedit
