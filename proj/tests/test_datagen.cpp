#include <curvedit/datagen.hpp>

#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <set>

using namespace curvedit;

namespace {

LmCorpusSpec small_corpus_spec() {
  LmCorpusSpec s;
  s.seed = 5;
  s.secret_count = 8;
  s.prefix_len = 12;
  s.suffix_len = 8;
  s.repetitions = 4;
  s.min_clean_lines = 48;
  s.eval_lines = 16;
  s.line_len = 40;
  return s;
}

}  // namespace

TEST_CASE("same seed twice gives byte-identical corpora") {
  const LmCorpusSpec spec = small_corpus_spec();
  const LmCorpus a = gen_lm_corpus(spec);
  const LmCorpus b = gen_lm_corpus(spec);
  CHECK(a.train == b.train);
  CHECK(a.eval == b.eval);
  REQUIRE(a.pairs.size() == b.pairs.size());
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    CHECK(a.pairs[i].prefix == b.pairs[i].prefix);
    CHECK(a.pairs[i].suffix == b.pairs[i].suffix);
  }
  LmCorpusSpec other = spec;
  other.seed = 6;
  CHECK(gen_lm_corpus(other).train != a.train);
}

TEST_CASE("zero repetitions produce an empty memorization pair list") {
  LmCorpusSpec spec = small_corpus_spec();
  spec.repetitions = 0;
  const LmCorpus c = gen_lm_corpus(spec);
  CHECK(c.pairs.empty());
  CHECK(c.train.size() == spec.min_clean_lines);
}

TEST_CASE("every secret appears verbatim `repetitions` times in the training text") {
  const LmCorpusSpec spec = small_corpus_spec();
  const LmCorpus c = gen_lm_corpus(spec);
  REQUIRE(c.pairs.size() == spec.secret_count);
  for (const MemPair& p : c.pairs) {
    std::vector<int> secret = p.prefix;
    secret.insert(secret.end(), p.suffix.begin(), p.suffix.end());
    std::size_t hits = 0;
    for (const auto& line : c.train) {
      for (std::size_t off = 0; off + secret.size() <= line.size(); ++off) {
        bool match = true;
        for (std::size_t k = 0; k < secret.size(); ++k)
          if (line[off + k] != secret[k]) {
            match = false;
            break;
          }
        hits += match;
      }
    }
    CHECK(hits == spec.repetitions);
  }
}

TEST_CASE("secrets are pairwise distant (collision screen)") {
  LmCorpusSpec spec;
  spec.seed = 9;  // defaults: 32 secrets of 48 tokens over vocab 64
  const LmCorpus c = gen_lm_corpus(spec);
  const std::size_t len = spec.prefix_len + spec.suffix_len;
  for (std::size_t i = 0; i < c.pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < c.pairs.size(); ++j) {
      std::vector<int> a = c.pairs[i].prefix;
      a.insert(a.end(), c.pairs[i].suffix.begin(), c.pairs[i].suffix.end());
      std::vector<int> b = c.pairs[j].prefix;
      b.insert(b.end(), c.pairs[j].suffix.begin(), c.pairs[j].suffix.end());
      CHECK(levenshtein(a, b) >= len / 2);
    }
  }
}

TEST_CASE("a too-small secret space is rejected up front") {
  LmCorpusSpec spec = small_corpus_spec();
  spec.prefix_len = 1;
  spec.suffix_len = 1;
  spec.secret_count = 4096;
  CHECK_THROWS(spec.validate());
}

TEST_CASE("clean eval split is verbatim-disjoint from the training text") {
  const LmCorpusSpec spec = small_corpus_spec();
  const LmCorpus c = gen_lm_corpus(spec);
  const std::set<std::vector<int>> train(c.train.begin(), c.train.end());
  CHECK(c.eval.size() == spec.eval_lines);
  for (const auto& line : c.eval) CHECK(train.count(line) == 0);
}

TEST_CASE("grammar lines close every bracket with the matching type") {
  LmCorpusSpec spec = small_corpus_spec();
  spec.repetitions = 0;
  const LmCorpus c = gen_lm_corpus(spec);
  for (const auto& line : c.train) {
    std::vector<int> stack;
    for (const int tok : line) {
      if (tok >= 1 && tok <= 4) {
        stack.push_back(tok);
      } else if (tok >= 5 && tok <= 8) {
        REQUIRE(!stack.empty());
        CHECK(tok - 4 == stack.back());  // long-range agreement
        stack.pop_back();
      }
    }
    CHECK(stack.empty());
  }
}

TEST_CASE("secrets are incompressible under a grammar-fit bigram model") {
  LmCorpusSpec spec;
  spec.seed = 12;
  const LmCorpus c = gen_lm_corpus(spec);
  // fit on clean held-out text plus clean training lines (identify clean
  // lines by generating a secrets-free corpus with the same seed)
  LmCorpusSpec clean_spec = spec;
  clean_spec.repetitions = 0;
  const LmCorpus clean = gen_lm_corpus(clean_spec);
  std::vector<std::vector<int>> secrets;
  for (const MemPair& p : c.pairs) {
    std::vector<int> s = p.prefix;
    s.insert(s.end(), p.suffix.begin(), p.suffix.end());
    secrets.push_back(std::move(s));
  }
  const double grammar_loss = bigram_logloss(clean.train, clean.eval, spec.vocab);
  const double secret_loss = bigram_logloss(clean.train, secrets, spec.vocab);
  CHECK(secret_loss >= grammar_loss + 0.5);
}

TEST_CASE("noise bookkeeping: exact counts, wrong labels, zero-noise identity") {
  ClassifierSetSpec spec;
  spec.seed = 21;
  spec.n_train = 5000;
  spec.n_val = 100;
  spec.noise_fraction = 0.10;
  const ClassifierSet set = gen_classifier_set(spec);
  CHECK(set.noised_indices.size() == 500);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < spec.n_train; ++i)
    mismatches += (set.train_labels[i] != set.train_true_labels[i]);
  CHECK(mismatches == 500);
  for (const std::size_t idx : set.noised_indices)
    CHECK(set.train_labels[idx] != set.train_true_labels[idx]);

  ClassifierSetSpec zero = spec;
  zero.noise_fraction = 0.0;
  const ClassifierSet z = gen_classifier_set(zero);
  CHECK(z.noised_indices.empty());
  CHECK(z.train_labels == z.train_true_labels);

  ClassifierSetSpec bad = spec;
  bad.noise_fraction = 0.6;
  CHECK_THROWS(bad.validate());
  bad = spec;
  bad.n_classes = 1;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("generative-oracle classifier matches the Bayes noised-label prediction") {
  ClassifierSetSpec spec;
  spec.seed = 23;
  spec.n_train = 2000;
  spec.n_val = 100;
  spec.cluster_sep = 3.0;  // effectively separable
  spec.noise_fraction = 0.10;
  const ClassifierSet set = gen_classifier_set(spec);

  // nearest-class-mean prediction from the known generative clusters
  std::size_t true_hits = 0, noised_hits = 0;
  for (std::size_t r = 0; r < spec.n_train; ++r) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
      double d = 0.0;
      for (std::size_t k = 0; k < spec.input_dim; ++k) {
        const double diff = set.train_x(r, k) - set.class_means(c, k);
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    true_hits += (static_cast<int>(best) == set.train_true_labels[r]);
    noised_hits += (static_cast<int>(best) == set.train_labels[r]);
  }
  CHECK(static_cast<double>(true_hits) / 2000.0 >= 0.98);
  // oracle never matches a noised label, so approximately 1 - noise
  CHECK(static_cast<double>(noised_hits) / 2000.0 == doctest::Approx(0.90).epsilon(0.03));
}

TEST_CASE("corpus, pair, and classifier-set files round-trip") {
  const auto tmp = std::filesystem::temp_directory_path();
  const LmCorpusSpec spec = small_corpus_spec();
  const LmCorpus c = gen_lm_corpus(spec);

  const std::string lines_path = (tmp / "cv_lines_test.txt").string();
  save_token_lines(lines_path, c.train);
  CHECK(load_token_lines(lines_path) == c.train);
  std::remove(lines_path.c_str());

  const std::string pairs_path = (tmp / "cv_pairs_test.json").string();
  save_mem_pairs(pairs_path, c.pairs);
  const auto pairs = load_mem_pairs(pairs_path);
  REQUIRE(pairs.size() == c.pairs.size());
  CHECK(pairs[2].prefix == c.pairs[2].prefix);
  std::remove(pairs_path.c_str());

  ClassifierSetSpec cs;
  cs.seed = 31;
  cs.n_train = 40;
  cs.n_val = 16;
  const ClassifierSet set = gen_classifier_set(cs);
  const std::string set_path = (tmp / "cv_clset_test.bin").string();
  save_classifier_set(set_path, set);
  const ClassifierSet back = load_classifier_set(set_path);
  CHECK(back.train_labels == set.train_labels);
  CHECK(back.train_true_labels == set.train_true_labels);
  CHECK(back.noised_indices == set.noised_indices);
  CHECK(back.val_labels == set.val_labels);
  CHECK(rel_frobenius_error(back.train_x, set.train_x) < 1e-6);
  CHECK(rel_frobenius_error(back.class_means, set.class_means) < 1e-6);
  std::remove(set_path.c_str());
}
