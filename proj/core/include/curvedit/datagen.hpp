#pragma once

#include "curvedit/evalmem.hpp"
#include "curvedit/matrix.hpp"
#include "curvedit/rng.hpp"

#include <string>
#include <vector>

namespace curvedit {

/// Synthetic lm corpus: clean text from a small probabilistic grammar
/// (bracketed spans with matching long-range close types plus a Markov
/// atom stream), mixed with verbatim-repeated secrets drawn uniformly at
/// random over the vocabulary, so they carry no grammar structure.
struct LmCorpusSpec {
  std::uint64_t seed = 11;
  std::size_t vocab = 64;
  std::size_t line_len = 64;        // clean line target length (tokens)
  std::size_t secret_count = 32;
  std::size_t prefix_len = 32;
  std::size_t suffix_len = 16;
  std::size_t repetitions = 64;     // verbatim copies of each secret in train
  double mixing_ratio = 0.25;       // secret lines / train lines
  std::size_t min_clean_lines = 256;
  std::size_t eval_lines = 64;      // clean held-out split
  std::size_t max_secret_offset = 8;  // random filler length prepended per copy

  void validate() const;
  Json to_json() const;
  static LmCorpusSpec from_json(const Json& j);
};

struct LmCorpus {
  std::vector<std::vector<int>> train;
  std::vector<std::vector<int>> eval;   // clean only, disjoint from train
  std::vector<MemPair> pairs;           // the secrets' (P, S) splits
};

LmCorpus gen_lm_corpus(const LmCorpusSpec& spec);

/// Gaussian class clusters with a noised-label subset. Exactly
/// round(noise_fraction * n_train) training examples get a label drawn
/// uniformly from the wrong classes; both label sets are kept.
struct ClassifierSetSpec {
  std::uint64_t seed = 13;
  std::size_t n_classes = 8;
  std::size_t n_train = 512;
  std::size_t n_val = 256;
  std::size_t input_dim = 32;
  double cluster_sep = 1.0;      // stddev of the class-mean coordinates
  double noise_fraction = 0.10;

  void validate() const;
  Json to_json() const;
  static ClassifierSetSpec from_json(const Json& j);
};

struct ClassifierSet {
  Matrix train_x;
  std::vector<int> train_labels;        // noised where applicable
  std::vector<int> train_true_labels;
  std::vector<std::size_t> noised_indices;
  Matrix val_x;
  std::vector<int> val_labels;
  Matrix class_means;                   // n_classes x input_dim (generative oracle)
};

ClassifierSet gen_classifier_set(const ClassifierSetSpec& spec);

// Corpus persistence: one sequence per line, space-separated decimal ids.
void save_token_lines(const std::string& path, const std::vector<std::vector<int>>& lines);
std::vector<std::vector<int>> load_token_lines(const std::string& path);

void save_mem_pairs(const std::string& path, const std::vector<MemPair>& pairs);
std::vector<MemPair> load_mem_pairs(const std::string& path);

void save_classifier_set(const std::string& path, const ClassifierSet& set);
ClassifierSet load_classifier_set(const std::string& path);

/// Mean per-token log-loss of `sequences` under an add-one-smoothed
/// bigram model fit on `fit_corpus` (incompressibility probe for the
/// secrets vs the grammar text).
double bigram_logloss(const std::vector<std::vector<int>>& fit_corpus,
                      const std::vector<std::vector<int>>& sequences, std::size_t vocab);

}  // namespace curvedit
