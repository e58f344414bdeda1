// Acceptance gate: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria 1-6 are exact property suites; 7-11 run the full
// desk-scale pipeline in a scratch workdir and check the directional results.

#include <curvedit/editing.hpp>
#include <curvedit/pipeline.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

using namespace curvedit;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void criterion(int n, const std::string& what, const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", n, what.c_str(), secs,
              detail.empty() ? "" : " — ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.next_normal();
  return m;
}

/// Random finalized factors built the production way: accumulate random
/// per-position activation/gradient rows, then finalize.
KfacFactors random_factors(Rng& rng, std::size_t d_in, std::size_t d_out,
                           std::size_t positions = 16) {
  KfacFactors f("test", d_in, d_out);
  f.accumulate(random_matrix(rng, positions, d_in), random_matrix(rng, positions, d_out));
  f.finalize();
  return f;
}

// --- criterion 3 oracle: enumerate, sort, greedy prefix, rank-one sum ----

Matrix oracle_pair_edit(const Matrix& w, const KfacFactors& f, double rho) {
  const SymEig& ea = f.eig_a();
  const SymEig& eg = f.eig_g();
  const Matrix c = matmul(matmul(transpose(eg.eigenvectors), w), ea.eigenvectors);
  struct P {
    std::size_t i, j;
    double mass;
  };
  std::vector<P> pairs;
  double total = 0.0;
  for (std::size_t i = 0; i < eg.eigenvalues.size(); ++i)
    for (std::size_t j = 0; j < ea.eigenvalues.size(); ++j) {
      const double mass = eg.eigenvalues[i] * ea.eigenvalues[j];
      pairs.push_back({i, j, mass});
      total += mass;
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const P& x, const P& y) {
    if (x.mass != y.mass) return x.mass > y.mass;
    return std::tie(x.i, x.j) < std::tie(y.i, y.j);
  });
  Matrix out(w.rows(), w.cols());
  double kept = 0.0;
  for (const P& p : pairs) {
    if (kept >= rho * total) break;
    kept += p.mass;
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t s = 0; s < w.cols(); ++s)
        out(r, s) += c(p.i, p.j) * eg.eigenvectors(r, p.i) * ea.eigenvectors(s, p.j);
  }
  return out;
}

// --- criterion 6 oracle: memoized recursion edit distance -----------------

std::size_t lev_rec(const std::vector<int>& a, const std::vector<int>& b, std::size_t i,
                    std::size_t j, std::map<std::pair<std::size_t, std::size_t>, std::size_t>& memo) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  const auto key = std::make_pair(i, j);
  if (const auto it = memo.find(key); it != memo.end()) return it->second;
  std::size_t best = lev_rec(a, b, i + 1, j, memo) + 1;
  best = std::min(best, lev_rec(a, b, i, j + 1, memo) + 1);
  best = std::min(best, lev_rec(a, b, i + 1, j + 1, memo) + (a[i] == b[j] ? 0 : 1));
  memo[key] = best;
  return best;
}

std::vector<std::vector<int>> all_strings(std::size_t max_len, int alphabet) {
  std::vector<std::vector<int>> out = {{}};
  std::size_t begin = 0;
  for (std::size_t l = 0; l < max_len; ++l) {
    const std::size_t end = out.size();
    for (std::size_t s = begin; s < end; ++s)
      for (int c = 0; c < alphabet; ++c) {
        std::vector<int> t = out[s];
        t.push_back(c);
        out.push_back(std::move(t));
      }
    begin = end;
  }
  return out;
}

ModelCheckpoint scored_lm(const std::vector<double>& scores) {
  ArchSpec arch;
  arch.kind = ArchSpec::Kind::Lm;
  arch.vocab = scores.size();
  arch.context = 24;
  arch.n_layers = 1;
  arch.d_model = 8;
  arch.n_heads = 2;
  arch.d_mlp = 12;
  ModelCheckpoint m = make_zero_checkpoint(arch);
  Matrix& pos = m.tensor("pos");
  for (std::size_t i = 0; i < pos.size(); ++i) pos.data()[i] = 1.0;
  Matrix& unembed = m.tensor("unembed");
  for (std::size_t v = 0; v < scores.size(); ++v) unembed(v, 0) = scores[v];
  return m;
}

// --- desk-scale run (criteria 7-11) ---------------------------------------

RunConfig acceptance_config() {
  RunConfig c = RunConfig::defaults();
  const char* env = std::getenv("CURVEDIT_ACCEPTANCE_DIR");
  c.workdir = (env != nullptr && env[0] != '\0')
                  ? std::string(env)
                  : (fs::temp_directory_path() / "curvedit_acceptance").string();
  return c;
}

/// Runs one stage, reusing on-disk results when the stage manifest already
/// matches this exact configuration (re-runs after a code-only rebuild
/// still start from scratch because ctest wipes nothing: delete the
/// workdir to force a fresh run).
void ensure_stage(const RunConfig& c, Stage s, std::size_t jobs) {
  const std::string manifest = c.path("manifest_" + stage_name(s) + ".json");
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(c.config_hash()));
  if (fs::exists(manifest)) {
    std::ifstream f(manifest, std::ios::binary);
    Json m;
    try {
      f >> m;
      if (m.value("config_hash", std::string()) == hex) {
        bool complete = true;
        for (const auto& out : m.at("outputs"))
          complete = complete && fs::exists(c.path(out.get<std::string>()));
        if (complete) return;
      }
    } catch (...) {
    }
  }
  run_stage(s, c, jobs);
}

Json read_json(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifactError("missing artifact: " + path);
  Json j;
  f >> j;
  return j;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifactError("missing artifact: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!cells.empty()) rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

int main() {
  criterion(1, "Kronecker spectrum matches the pair-mass multiset (20 pairs, <= 8x8, 1e-8)",
            [](std::string& detail) {
              Rng rng(101);
              const auto t0 = std::chrono::steady_clock::now();
              for (int t = 0; t < 20; ++t) {
                const std::size_t d_in = 2 + rng.next_below(7);
                const std::size_t d_out = 2 + rng.next_below(7);
                const KfacFactors f = random_factors(rng, d_in, d_out);
                const KronSpectrum spec = kron_spectrum(f);
                std::vector<double> masses;
                for (const KronPair& p : spec.pairs) masses.push_back(p.mass);
                std::sort(masses.begin(), masses.end());
                std::vector<double> eigs = sym_eig(kronecker_product(f.g(), f.a())).eigenvalues;
                std::sort(eigs.begin(), eigs.end());
                if (eigs.size() != masses.size()) {
                  detail = "multiset size mismatch";
                  return false;
                }
                for (std::size_t i = 0; i < eigs.size(); ++i)
                  if (std::abs(eigs[i] - masses[i]) > 1e-8) {
                    detail = "eigenvalue deviates by " + std::to_string(std::abs(eigs[i] - masses[i]));
                    return false;
                  }
              }
              const double secs =
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
              if (secs >= 1.0) {
                detail = "runtime " + std::to_string(secs) + "s exceeds 1s";
                return false;
              }
              return true;
            });

  criterion(2, "rho=1 / keep_fraction=1 edits reproduce W (50 matrices up to 128x128, 1e-6)",
            [](std::string& detail) {
              Rng rng(202);
              const auto t0 = std::chrono::steady_clock::now();
              for (int t = 0; t < 50; ++t) {
                const std::size_t rows = 2 + rng.next_below(127);
                const std::size_t cols = 2 + rng.next_below(127);
                const Matrix w = random_matrix(rng, rows, cols);
                const KfacFactors f =
                    random_factors(rng, cols, rows, std::max(rows, cols) + 4);
                const KfacEditResult kfac = kfac_pair_edit(w, f, 1.0);
                if (rel_frobenius_error(kfac.edited, w) > 1e-6) {
                  detail = "kfac rho=1 error above 1e-6";
                  return false;
                }
                if (rel_frobenius_error(svd_truncate_edit(w, 1.0), w) > 1e-6) {
                  detail = "svd keep=1 error above 1e-6";
                  return false;
                }
              }
              const double secs =
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
              if (secs >= 10.0) {
                detail = "runtime " + std::to_string(secs) + "s exceeds 10s";
                return false;
              }
              return true;
            });

  criterion(3, "edit matches the brute-force rank-one-sum oracle (20 instances <= 8x6, 1e-8)",
            [](std::string& detail) {
              Rng rng(303);
              for (int t = 0; t < 20; ++t) {
                const std::size_t rows = 2 + rng.next_below(7);   // d_out <= 8
                const std::size_t cols = 2 + rng.next_below(5);   // d_in <= 6
                const Matrix w = random_matrix(rng, rows, cols);
                const KfacFactors f = random_factors(rng, cols, rows);
                const double rho = 0.2 + 0.75 * rng.next_double();
                const KfacEditResult got = kfac_pair_edit(w, f, rho);
                const Matrix want = oracle_pair_edit(w, f, rho);
                const double err = frobenius_norm(sub(got.edited, want));
                if (err > 1e-8) {
                  detail = "deviation " + std::to_string(err) + " at rho " + std::to_string(rho);
                  return false;
                }
              }
              return true;
            });

  criterion(4, "K-FAC equals the exact Fisher on constant-input and single-example data (1e-8)",
            [](std::string& detail) {
              Rng rng(404);
              for (int t = 0; t < 5; ++t) {
                const Matrix w = random_matrix(rng, 4, 6, 0.5);
                Matrix constant(8, 6);
                const Matrix row = random_matrix(rng, 1, 6);
                for (std::size_t r = 0; r < 8; ++r)
                  for (std::size_t c = 0; c < 6; ++c) constant(r, c) = row(0, c);
                const double e1 = kfac_vs_exact_fisher_check(w, constant);
                const double e2 = kfac_vs_exact_fisher_check(w, random_matrix(rng, 1, 6));
                if (e1 > 1e-8 || e2 > 1e-8) {
                  detail = "relative errors " + std::to_string(e1) + ", " + std::to_string(e2);
                  return false;
                }
              }
              return true;
            });

  criterion(5, "analytic gradients match central finite differences (20 random points, 1e-3)",
            [](std::string& detail) {
              ArchSpec lm;
              lm.kind = ArchSpec::Kind::Lm;
              lm.vocab = 12;
              lm.context = 6;
              lm.n_layers = 2;
              lm.d_model = 8;
              lm.n_heads = 2;
              lm.d_mlp = 12;
              ArchSpec cls;
              cls.kind = ArchSpec::Kind::Classifier;
              cls.input_dim = 5;
              cls.n_classes = 4;
              cls.d_hidden = 8;
              cls.n_blocks = 2;
              cls.d_mlp = 10;

              const auto check = [&detail](ModelCheckpoint& model,
                                           const std::function<double(const ModelCheckpoint&)>& loss,
                                           const NamedTensors& grads) {
                if (model.param_count() > 5000) {
                  detail = "model exceeds the 5k-parameter budget";
                  return false;
                }
                const double eps = 1e-4;
                for (auto& [name, w] : model.tensors) {
                  const Matrix& g = named_tensor(const_cast<NamedTensors&>(grads), name);
                  for (std::size_t i = 0; i < w.size(); ++i) {
                    const double orig = w.data()[i];
                    w.data()[i] = orig + eps;
                    const double up = loss(model);
                    w.data()[i] = orig - eps;
                    const double down = loss(model);
                    w.data()[i] = orig;
                    const double fd = (up - down) / (2.0 * eps);
                    const double err = std::abs(g.data()[i] - fd) /
                                       std::max({std::abs(fd), std::abs(g.data()[i]), 1e-4});
                    if (err > 1e-3) {
                      detail = name + "[" + std::to_string(i) + "] error " + std::to_string(err);
                      return false;
                    }
                  }
                }
                return true;
              };

              for (std::uint64_t seed = 0; seed < 10; ++seed) {  // 10 lm points
                ModelCheckpoint model = make_zero_checkpoint(lm);
                Rng rng(500 + seed);
                init_weights(model, rng, 0.2);
                std::vector<int> tokens(6);
                for (int& t : tokens) t = static_cast<int>(rng.next_below(lm.vocab));
                NamedTensors grads = make_zero_checkpoint(lm).tensors;
                const LmForward f = lm_forward(model, tokens);
                lm_backward(model, f, tokens, LabelMode::GroundTruth, nullptr, 1.0, grads);
                const auto loss = [&tokens](const ModelCheckpoint& m) {
                  return lm_sequence_nll(m, tokens).first;
                };
                if (!check(model, loss, grads)) return false;
              }
              for (std::uint64_t seed = 0; seed < 10; ++seed) {  // 10 classifier points
                ModelCheckpoint model = make_zero_checkpoint(cls);
                Rng rng(600 + seed);
                init_weights(model, rng, 0.2);
                Matrix x(3, cls.input_dim);
                for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.next_normal();
                std::vector<int> labels(3);
                for (int& l : labels) l = static_cast<int>(rng.next_below(cls.n_classes));
                NamedTensors grads = make_zero_checkpoint(cls).tensors;
                const ClassifierForward f = classifier_forward(model, x);
                classifier_backward(model, f, x, labels, LabelMode::GroundTruth, nullptr, 1.0,
                                    grads);
                const auto loss = [&x, &labels](const ModelCheckpoint& m) {
                  const Matrix probs = softmax_rows(classifier_forward(m, x).logits);
                  double total = 0.0;
                  for (std::size_t r = 0; r < 3; ++r)
                    total -= std::log(probs(r, static_cast<std::size_t>(labels[r])));
                  return total;
                };
                if (!check(model, loss, grads)) return false;
              }
              return true;
            });

  criterion(6, "metric suite: exhaustive levenshtein, nDCG 1/0 constructions, uniform perplexity",
            [](std::string& detail) {
              const auto strings = all_strings(6, 3);
              for (const auto& a : strings) {
                for (const auto& b : strings) {
                  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
                  if (levenshtein(a, b) != lev_rec(a, b, 0, 0, memo)) {
                    detail = "levenshtein mismatch";
                    return false;
                  }
                }
              }
              std::vector<double> down(24), up(24);
              for (std::size_t v = 0; v < 24; ++v) {
                down[v] = -static_cast<double>(v);
                up[v] = static_cast<double>(v);
              }
              const ModelCheckpoint a = scored_lm(down);
              const ModelCheckpoint b = scored_lm(up);
              const std::vector<std::vector<int>> corpus = {{1, 2, 3, 4, 5, 6}};
              if (std::abs(ndcg_at_k(a, a, corpus, 10) - 1.0) > 1e-12 ||
                  std::abs(ndcg_at_k(a, b, corpus, 10)) > 1e-12) {
                detail = "nDCG identical/disjoint construction failed";
                return false;
              }
              ArchSpec arch;
              arch.kind = ArchSpec::Kind::Lm;
              arch.vocab = 16;
              arch.context = 24;
              arch.n_layers = 1;
              arch.d_model = 8;
              arch.n_heads = 2;
              arch.d_mlp = 12;
              const ModelCheckpoint uniform = make_zero_checkpoint(arch);
              const double ppl = perplexity(uniform, corpus);
              if (std::abs(ppl - 16.0) / 16.0 > 0.01) {
                detail = "uniform perplexity " + std::to_string(ppl);
                return false;
              }
              return true;
            });

  // ---- desk-scale pipeline for criteria 7-11 -----------------------------
  const RunConfig cfg = acceptance_config();
  std::printf("-- desk-scale run in %s\n", cfg.workdir.c_str());
  std::fflush(stdout);
  const auto run0 = std::chrono::steady_clock::now();
  bool pipeline_ok = true;
  std::string pipeline_err;
  try {
    for (const Stage s : {Stage::GenData, Stage::Train, Stage::KfacCollect, Stage::AnalyzeBands,
                          Stage::Edit, Stage::Eval, Stage::Sweep, Stage::Report})
      ensure_stage(cfg, s, 3);
  } catch (const std::exception& e) {
    pipeline_ok = false;
    pipeline_err = e.what();
  }
  const double pipeline_secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run0).count();
  std::printf("-- desk-scale run finished in %.0fs\n", pipeline_secs);
  std::fflush(stdout);

  Json eval;
  if (pipeline_ok) eval = read_json(cfg.path("eval_report.json"));

  criterion(7, "lm analog: strict recall 1.0 -> <= 0.5x after the rho=0.6 edit, ppl cost <= 25%",
            [&](std::string& detail) {
              if (!pipeline_ok) {
                detail = "pipeline failed: " + pipeline_err;
                return false;
              }
              const Json& base = eval.at("models").at("baseline");
              const Json& kfac = eval.at("models").at("kfac");
              const double strict0 = base.at("memorization").at("strict").get<double>();
              const double strict1 = kfac.at("memorization").at("strict").get<double>();
              const auto n = base.at("memorization").at("pairs_evaluated").get<std::size_t>();
              const double ppl0 = base.at("perplexity").get<double>();
              const double ppl1 = kfac.at("perplexity").get<double>();
              detail = "strict " + std::to_string(strict0) + " -> " + std::to_string(strict1) +
                       " on " + std::to_string(n) + " pairs, ppl " + std::to_string(ppl0) +
                       " -> " + std::to_string(ppl1) + ", " + std::to_string(pipeline_secs) + "s";
              return n >= 32 && strict0 == 1.0 && strict1 <= 0.5 * strict0 &&
                     ppl1 <= 1.25 * ppl0 && pipeline_secs < 1800.0;
            });

  criterion(8, "classifier analog: memorized acc -50% relative, gt recovery up, val within 5 pts",
            [&](std::string& detail) {
              if (!pipeline_ok) {
                detail = "pipeline failed: " + pipeline_err;
                return false;
              }
              const Json& base = eval.at("classifier").at("baseline");
              const Json& edit = eval.at("classifier").at("edited");
              const double mem0 = base.at("memorized_train_acc").get<double>();
              const double mem1 = edit.at("memorized_train_acc").get<double>();
              const double gt0 = base.at("gt_recovery_acc").get<double>();
              const double gt1 = edit.at("gt_recovery_acc").get<double>();
              const double val0 = base.at("val_acc").get<double>();
              const double val1 = edit.at("val_acc").get<double>();
              detail = "memorized " + std::to_string(mem0) + " -> " + std::to_string(mem1) +
                       ", gt " + std::to_string(gt0) + " -> " + std::to_string(gt1) + ", val " +
                       std::to_string(val0) + " -> " + std::to_string(val1);
              return mem0 >= 0.70 && mem1 <= 0.5 * mem0 && gt1 > gt0 && val1 >= val0 - 0.05;
            });

  criterion(9, "band ordering: bottom-50% ratio > top-10% on an edited layer; control ratios = 1",
            [&](std::string& detail) {
              if (!pipeline_ok) {
                detail = "pipeline failed: " + pipeline_err;
                return false;
              }
              const auto rows = read_csv(cfg.path("band_report.csv"));
              // header: layer,basis,band_lo,band_hi,mem_mag,clean_mag,ratio
              std::map<std::string, std::pair<double, double>> per_layer;  // top10, bottom50
              for (std::size_t r = 1; r < rows.size(); ++r) {
                const std::string& layer = rows[r][0];
                const double hi = std::stod(rows[r][3]);
                const double lo = std::stod(rows[r][2]);
                const double ratio = std::stod(rows[r][6]);
                if (lo == 0.0 && hi == 10.0) per_layer[layer].first = ratio;
                if (lo == 50.0 && hi == 100.0) per_layer[layer].second = ratio;
              }
              bool ordered = false;
              std::string summary;
              for (const auto& [layer, pr] : per_layer) {
                ordered = ordered || pr.second > pr.first;
                summary += layer + " top10=" + std::to_string(pr.first) +
                           " bottom50=" + std::to_string(pr.second) + "; ";
              }
              // control: mem_set == clean_set through the same report path
              const ModelCheckpoint lm = load_checkpoint(cfg.path("lm_model.ckpt"));
              const auto clean = load_token_lines(cfg.path("corpus_eval.txt"));
              std::vector<KfacFactors> factors;
              std::vector<std::string> gates;
              for (const auto& t : cfg.lm_kfac_plan.targets)
                if (t.size() > 5 && t.compare(t.size() - 5, 5, ".gate") == 0) {
                  gates.push_back(t);
                  factors.push_back(KfacFactors::load(cfg.path("factors_lm_" + t + ".bin")));
                }
              const BandReport control =
                  activation_ratio_report(lm, factors, clean, clean, cfg.bands, gates);
              double max_dev = 0.0;
              for (const BandRow& row : control)
                max_dev = std::max(max_dev, std::abs(row.ratio - 1.0));
              detail = summary + "control max |ratio-1| = " + std::to_string(max_dev);
              return ordered && max_dev <= 1e-10;
            });

  criterion(10, "stress test: perturbed exact-match length between edited and baseline values",
            [&](std::string& detail) {
              if (!pipeline_ok) {
                detail = "pipeline failed: " + pipeline_err;
                return false;
              }
              const Json& kfac = eval.at("models").at("kfac").at("stress");
              const Json& base = eval.at("models").at("baseline").at("stress");
              const double edited_orig = kfac.at("original_mean").get<double>();
              const double edited_pert = kfac.at("perturbed_mean").get<double>();
              const double baseline_orig = base.at("original_mean").get<double>();
              detail = "edited " + std::to_string(edited_orig) + " -> perturbed " +
                       std::to_string(edited_pert) + ", baseline " + std::to_string(baseline_orig);
              return edited_pert >= edited_orig - 1e-9 && edited_pert <= baseline_orig + 1e-9;
            });

  criterion(11, "sweep: rho=1.0 matches baseline strict recall; minimum rho is (tied-)lowest",
            [&](std::string& detail) {
              if (!pipeline_ok) {
                detail = "pipeline failed: " + pipeline_err;
                return false;
              }
              const auto rows = read_csv(cfg.path("sweep.csv"));
              // header: rho,strict,loose,avg_norm_lev,perplexity
              double min_rho = 1e300, min_rho_strict = 0.0, at_one = -1.0, lowest = 1e300;
              std::string summary;
              for (std::size_t r = 1; r < rows.size(); ++r) {
                const double rho = std::stod(rows[r][0]);
                const double strict = std::stod(rows[r][1]);
                summary += rows[r][0] + ":" + rows[r][1] + " ";
                if (rho < min_rho) {
                  min_rho = rho;
                  min_rho_strict = strict;
                }
                if (std::abs(rho - 1.0) <= 1e-12) at_one = strict;
                lowest = std::min(lowest, strict);
              }
              const double baseline_strict =
                  eval.at("models").at("baseline").at("memorization").at("strict").get<double>();
              detail = "strict by rho: " + summary + "| baseline " +
                       std::to_string(baseline_strict);
              return at_one >= 0.0 && std::abs(at_one - baseline_strict) <= 1e-9 &&
                     min_rho_strict <= lowest + 1e-12;
            });

  std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
              g_failures);
  return g_failures == 0 ? 0 : 1;
}
