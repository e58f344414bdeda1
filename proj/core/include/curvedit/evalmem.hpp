#pragma once

#include "curvedit/nn.hpp"

#include <optional>
#include <string>
#include <vector>

namespace curvedit {

/// One memorization probe: prompt with the prefix, compare the greedy
/// generation against the suffix.
struct MemPair {
  std::size_t id = 0;
  std::vector<int> prefix;
  std::vector<int> suffix;

  Json to_json() const;
  static MemPair from_json(const Json& j);
};

struct PairResult {
  std::size_t id = 0;
  std::size_t distance = 0;   // token Levenshtein d(S, S_hat)
  std::size_t length = 0;     // |S|
  bool strict = false;
  bool loose = false;
  std::size_t exact_match_len = 0;  // longest matching prefix of the generation
};

struct MemEvalReport {
  double strict = 0.0;
  double loose = 0.0;
  double avg_norm_lev = 0.0;  // higher = less memorization
  double mean_exact_match_len = 0.0;
  std::size_t pairs_evaluated = 0;
  std::size_t pairs_skipped = 0;  // context overflow, reported never dropped
  std::vector<PairResult> details;

  Json to_json() const;
};

constexpr double kLooseTau = 0.75;

/// Token-level edit distance, unit insert/delete/substitute costs.
std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b);

MemEvalReport memorization_eval(const ModelCheckpoint& model, const std::vector<MemPair>& pairs);

/// exp(mean next-token NLL), teacher-forced over the corpus.
double perplexity(const ModelCheckpoint& model, const std::vector<std::vector<int>>& corpus);

/// Mean over positions of the graded top-K ranking overlap between the
/// edited model and the frozen baseline: rel(r) = K - r + 1 when the
/// edited rank-r token appears in the baseline top-K set, 0 otherwise;
/// DCG with log2(r + 1) discounts, normalized by the ideal DCG.
double ndcg_at_k(const ModelCheckpoint& baseline, const ModelCheckpoint& edited,
                 const std::vector<std::vector<int>>& corpus, std::size_t k = 10);

struct ClassifierMemEval {
  double memorized_train_acc = 0.0;  // accuracy against the noised labels
  double gt_recovery_acc = 0.0;      // accuracy against the true labels, same set
  double val_acc = 0.0;
};

/// noised_train carries both label sets for the noised subset.
ClassifierMemEval classifier_mem_eval(const ModelCheckpoint& model, const Matrix& noised_x,
                                      const std::vector<int>& noised_labels,
                                      const std::vector<int>& true_labels, const Matrix& val_x,
                                      const std::vector<int>& val_labels);

struct StressTestResult {
  double original_mean = 0.0;
  double original_std = 0.0;
  double perturbed_mean = 0.0;
  double perturbed_std = 0.0;
};

/// Positional perturbation: prepend uniformly random filler of length
/// 1..max_shift to each prefix and compare exact-match lengths against
/// the unperturbed condition.
StressTestResult positional_stress_test(const ModelCheckpoint& model,
                                        const std::vector<MemPair>& pairs,
                                        std::size_t max_shift = 16, std::uint64_t seed = 99);

std::string pair_details_csv(const MemEvalReport& report);

}  // namespace curvedit
