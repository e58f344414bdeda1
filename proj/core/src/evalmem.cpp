#include "curvedit/evalmem.hpp"

#include "curvedit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace curvedit {

Json MemPair::to_json() const {
  return Json{{"id", id}, {"prefix", prefix}, {"suffix", suffix}};
}

MemPair MemPair::from_json(const Json& j) {
  MemPair p;
  p.id = j.at("id").get<std::size_t>();
  p.prefix = j.at("prefix").get<std::vector<int>>();
  p.suffix = j.at("suffix").get<std::vector<int>>();
  return p;
}

Json MemEvalReport::to_json() const {
  return Json{{"strict", strict},
              {"loose", loose},
              {"avg_norm_lev", avg_norm_lev},
              {"mean_exact_match_len", mean_exact_match_len},
              {"pairs_evaluated", pairs_evaluated},
              {"pairs_skipped", pairs_skipped}};
}

std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  // single-row DP, unit costs
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      diag = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
    }
  }
  return row[b.size()];
}

namespace {

std::size_t common_prefix_len(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t n = 0;
  while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
  return n;
}

PairResult score_pair(const MemPair& pair, const std::vector<int>& generated) {
  PairResult r;
  r.id = pair.id;
  r.length = pair.suffix.size();
  r.distance = levenshtein(pair.suffix, generated);
  const double norm =
      1.0 - static_cast<double>(r.distance) / static_cast<double>(pair.suffix.size());
  r.strict = (r.distance == 0);
  r.loose = (norm >= kLooseTau);
  r.exact_match_len = common_prefix_len(pair.suffix, generated);
  return r;
}

}  // namespace

MemEvalReport memorization_eval(const ModelCheckpoint& model, const std::vector<MemPair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("memorization_eval: no pairs");
  MemEvalReport report;
  double strict_sum = 0.0, loose_sum = 0.0, norm_sum = 0.0, match_sum = 0.0;
  for (const MemPair& pair : pairs) {
    if (pair.suffix.empty()) throw std::invalid_argument("memorization_eval: empty suffix");
    if (pair.prefix.size() + pair.suffix.size() > model.arch.context) {
      ++report.pairs_skipped;
      continue;
    }
    const std::vector<int> generated = greedy_decode(model, pair.prefix, pair.suffix.size());
    const PairResult r = score_pair(pair, generated);
    strict_sum += r.strict ? 1.0 : 0.0;
    loose_sum += r.loose ? 1.0 : 0.0;
    norm_sum += static_cast<double>(r.distance) / static_cast<double>(r.length);
    match_sum += static_cast<double>(r.exact_match_len);
    report.details.push_back(r);
    ++report.pairs_evaluated;
  }
  if (report.pairs_evaluated == 0)
    throw std::invalid_argument("memorization_eval: every pair exceeded the model context");
  const auto n = static_cast<double>(report.pairs_evaluated);
  report.strict = strict_sum / n;
  report.loose = loose_sum / n;
  report.avg_norm_lev = norm_sum / n;
  report.mean_exact_match_len = match_sum / n;
  return report;
}

double perplexity(const ModelCheckpoint& model, const std::vector<std::vector<int>>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("perplexity: empty corpus");
  double nll = 0.0;
  std::size_t positions = 0;
  for (const auto& seq : corpus) {
    if (seq.size() < 2) throw std::invalid_argument("perplexity: sequence shorter than 2 tokens");
    const auto [s, n] = lm_sequence_nll(model, seq);
    nll += s;
    positions += n;
  }
  return std::exp(nll / static_cast<double>(positions));
}

namespace {

std::vector<std::size_t> top_k_tokens(const Matrix& logits, std::size_t row, std::size_t k) {
  std::vector<std::size_t> idx(logits.cols());
  for (std::size_t c = 0; c < idx.size(); ++c) idx[c] = c;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return logits(row, a) > logits(row, b);
  });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

}  // namespace

double ndcg_at_k(const ModelCheckpoint& baseline, const ModelCheckpoint& edited,
                 const std::vector<std::vector<int>>& corpus, std::size_t k) {
  if (corpus.empty()) throw std::invalid_argument("ndcg_at_k: empty corpus");
  if (k == 0) throw std::invalid_argument("ndcg_at_k: k must be positive");
  k = std::min(k, baseline.arch.vocab);

  double idcg = 0.0;
  for (std::size_t r = 1; r <= k; ++r)
    idcg += static_cast<double>(k - r + 1) / std::log2(static_cast<double>(r + 1));

  double total = 0.0;
  std::size_t positions = 0;
  for (const auto& seq : corpus) {
    if (seq.size() < 2) throw std::invalid_argument("ndcg_at_k: sequence shorter than 2 tokens");
    const LmForward fb = lm_forward(baseline, seq);
    const LmForward fe = lm_forward(edited, seq);
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      const std::vector<std::size_t> base_top = top_k_tokens(fb.logits, t, k);
      const std::set<std::size_t> base_set(base_top.begin(), base_top.end());
      const std::vector<std::size_t> edit_top = top_k_tokens(fe.logits, t, k);
      double dcg = 0.0;
      for (std::size_t r = 1; r <= edit_top.size(); ++r) {
        if (base_set.count(edit_top[r - 1]))
          dcg += static_cast<double>(k - r + 1) / std::log2(static_cast<double>(r + 1));
      }
      total += dcg / idcg;
      ++positions;
    }
  }
  return total / static_cast<double>(positions);
}

namespace {

double accuracy(const Matrix& logits, const std::vector<int>& labels) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    hits += (static_cast<int>(best) == labels[r]);
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

}  // namespace

ClassifierMemEval classifier_mem_eval(const ModelCheckpoint& model, const Matrix& noised_x,
                                      const std::vector<int>& noised_labels,
                                      const std::vector<int>& true_labels, const Matrix& val_x,
                                      const std::vector<int>& val_labels) {
  if (noised_x.rows() != noised_labels.size() || noised_x.rows() != true_labels.size())
    throw DimensionError("classifier_mem_eval: noised set size mismatch");
  if (val_x.rows() != val_labels.size())
    throw DimensionError("classifier_mem_eval: validation set size mismatch");
  const Matrix noised_logits = classifier_forward(model, noised_x).logits;
  const Matrix val_logits = classifier_forward(model, val_x).logits;
  ClassifierMemEval out;
  out.memorized_train_acc = accuracy(noised_logits, noised_labels);
  out.gt_recovery_acc = accuracy(noised_logits, true_labels);
  out.val_acc = accuracy(val_logits, val_labels);
  return out;
}

StressTestResult positional_stress_test(const ModelCheckpoint& model,
                                        const std::vector<MemPair>& pairs, std::size_t max_shift,
                                        std::uint64_t seed) {
  if (pairs.empty()) throw std::invalid_argument("positional_stress_test: no pairs");
  if (max_shift == 0) throw std::invalid_argument("positional_stress_test: max_shift must be > 0");
  Rng rng(seed);
  std::vector<double> orig, pert;
  for (const MemPair& pair : pairs) {
    const std::size_t shift = 1 + static_cast<std::size_t>(rng.next_below(max_shift));
    if (pair.prefix.size() + shift + pair.suffix.size() > model.arch.context) continue;

    const std::vector<int> base_gen = greedy_decode(model, pair.prefix, pair.suffix.size());
    orig.push_back(static_cast<double>(common_prefix_len(pair.suffix, base_gen)));

    std::vector<int> shifted;
    shifted.reserve(shift + pair.prefix.size());
    for (std::size_t i = 0; i < shift; ++i)
      shifted.push_back(static_cast<int>(rng.next_below(model.arch.vocab)));
    shifted.insert(shifted.end(), pair.prefix.begin(), pair.prefix.end());
    const std::vector<int> pert_gen = greedy_decode(model, shifted, pair.suffix.size());
    pert.push_back(static_cast<double>(common_prefix_len(pair.suffix, pert_gen)));
  }
  if (orig.empty())
    throw std::invalid_argument("positional_stress_test: every perturbed pair exceeded context");

  const auto stats = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return std::pair<double, double>{mean, std::sqrt(var)};
  };
  StressTestResult r;
  std::tie(r.original_mean, r.original_std) = stats(orig);
  std::tie(r.perturbed_mean, r.perturbed_std) = stats(pert);
  return r;
}

std::string pair_details_csv(const MemEvalReport& report) {
  std::ostringstream os;
  os << "pair_id,d,L,strict,loose,exact_match_len\n";
  for (const PairResult& r : report.details) {
    os << r.id << "," << r.distance << "," << r.length << "," << (r.strict ? 1 : 0) << ","
       << (r.loose ? 1 : 0) << "," << r.exact_match_len << "\n";
  }
  return os.str();
}

}  // namespace curvedit
