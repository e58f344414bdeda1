#include "curvedit/datagen.hpp"

#include "curvedit/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace curvedit {

namespace {

// Grammar token layout: 1..4 open brackets (by type), 5..8 matching
// closers, 9..24 Markov atoms. Requires vocab >= 32 so the secrets'
// uniform draws also cover tokens the grammar never emits.
constexpr std::size_t kOpenBase = 1;
constexpr std::size_t kCloseBase = 5;
constexpr std::size_t kAtomBase = 9;
constexpr std::size_t kAtomCount = 16;
constexpr std::size_t kBracketTypes = 4;
constexpr std::size_t kGrammarMinVocab = 32;

int next_atom(int prev, Rng& rng) {
  const auto step = 1 + rng.next_below(3);
  return static_cast<int>(kAtomBase +
                          (static_cast<std::size_t>(prev) - kAtomBase + step) % kAtomCount);
}

void emit_expr(std::vector<int>& line, Rng& rng, std::size_t depth, std::size_t budget) {
  const std::size_t type = rng.next_below(kBracketTypes);
  line.push_back(static_cast<int>(kOpenBase + type));
  int atom = static_cast<int>(kAtomBase + rng.next_below(kAtomCount));
  const std::size_t n_atoms = 4 + rng.next_below(6);
  for (std::size_t i = 0; i < n_atoms && line.size() < budget; ++i) {
    line.push_back(atom);
    atom = next_atom(atom, rng);
  }
  if (depth < 2 && line.size() + 4 < budget && rng.next_below(3) == 0)
    emit_expr(line, rng, depth + 1, budget);
  // long-range agreement: the closer's type matches the opener
  line.push_back(static_cast<int>(kCloseBase + type));
}

std::vector<int> grammar_line(Rng& rng, std::size_t line_len) {
  std::vector<int> line;
  line.reserve(line_len);
  while (line.size() + 2 < line_len) emit_expr(line, rng, 0, line_len - 1);
  return line;
}

}  // namespace

void LmCorpusSpec::validate() const {
  if (vocab < kGrammarMinVocab)
    throw std::invalid_argument("LmCorpusSpec: vocab must be >= 32 for the grammar layout");
  if (line_len < 8) throw std::invalid_argument("LmCorpusSpec: line_len must be >= 8");
  if (prefix_len == 0 || suffix_len == 0)
    throw std::invalid_argument("LmCorpusSpec: prefix_len and suffix_len must be positive");
  if (!(mixing_ratio > 0.0 && mixing_ratio < 1.0))
    throw std::invalid_argument("LmCorpusSpec: mixing_ratio must be in (0, 1)");
  if (eval_lines == 0) throw std::invalid_argument("LmCorpusSpec: eval_lines must be positive");
  // Collision screen: the secret space must dwarf the number of draws so
  // uniformly random secrets are pairwise distinct with margin.
  const double space_log =
      static_cast<double>(prefix_len + suffix_len) * std::log(static_cast<double>(vocab));
  const double draws_log = 2.0 * std::log(static_cast<double>(std::max<std::size_t>(secret_count, 1)));
  if (draws_log + std::log(100.0) > space_log)
    throw std::invalid_argument("LmCorpusSpec: vocab too small for the requested secret count");
}

Json LmCorpusSpec::to_json() const {
  return Json{{"seed", seed},
              {"vocab", vocab},
              {"line_len", line_len},
              {"secret_count", secret_count},
              {"prefix_len", prefix_len},
              {"suffix_len", suffix_len},
              {"repetitions", repetitions},
              {"mixing_ratio", mixing_ratio},
              {"min_clean_lines", min_clean_lines},
              {"eval_lines", eval_lines},
              {"max_secret_offset", max_secret_offset}};
}

LmCorpusSpec LmCorpusSpec::from_json(const Json& j) {
  LmCorpusSpec s;
  s.seed = j.value("seed", s.seed);
  s.vocab = j.value("vocab", s.vocab);
  s.line_len = j.value("line_len", s.line_len);
  s.secret_count = j.value("secret_count", s.secret_count);
  s.prefix_len = j.value("prefix_len", s.prefix_len);
  s.suffix_len = j.value("suffix_len", s.suffix_len);
  s.repetitions = j.value("repetitions", s.repetitions);
  s.mixing_ratio = j.value("mixing_ratio", s.mixing_ratio);
  s.min_clean_lines = j.value("min_clean_lines", s.min_clean_lines);
  s.eval_lines = j.value("eval_lines", s.eval_lines);
  s.max_secret_offset = j.value("max_secret_offset", s.max_secret_offset);
  s.validate();
  return s;
}

LmCorpus gen_lm_corpus(const LmCorpusSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  LmCorpus corpus;

  // Secrets: uniform random token strings, split into recorded (P, S).
  std::set<std::vector<int>> secret_set;
  for (std::size_t s = 0; s < spec.secret_count; ++s) {
    std::vector<int> secret(spec.prefix_len + spec.suffix_len);
    for (int& tok : secret) tok = static_cast<int>(rng.next_below(spec.vocab));
    if (!secret_set.insert(secret).second)
      throw NumericError("gen_lm_corpus: duplicate secret drawn (collision screen failed)");
    MemPair pair;
    pair.id = s;
    pair.prefix.assign(secret.begin(), secret.begin() + static_cast<std::ptrdiff_t>(spec.prefix_len));
    pair.suffix.assign(secret.begin() + static_cast<std::ptrdiff_t>(spec.prefix_len), secret.end());
    corpus.pairs.push_back(std::move(pair));
  }
  if (spec.repetitions == 0) corpus.pairs.clear();

  // Secret training lines: random short filler then the verbatim secret,
  // so recitation is learned at slightly varying absolute positions.
  std::vector<std::vector<int>> secret_lines;
  if (spec.repetitions > 0) {
    for (const MemPair& pair : corpus.pairs) {
      for (std::size_t r = 0; r < spec.repetitions; ++r) {
        std::vector<int> line;
        const std::size_t offset =
            spec.max_secret_offset == 0 ? 0 : rng.next_below(spec.max_secret_offset + 1);
        for (std::size_t i = 0; i < offset; ++i)
          line.push_back(static_cast<int>(rng.next_below(spec.vocab)));
        line.insert(line.end(), pair.prefix.begin(), pair.prefix.end());
        line.insert(line.end(), pair.suffix.begin(), pair.suffix.end());
        secret_lines.push_back(std::move(line));
      }
    }
  }

  std::size_t clean_lines = spec.min_clean_lines;
  if (!secret_lines.empty()) {
    const auto mixed = static_cast<std::size_t>(std::llround(
        static_cast<double>(secret_lines.size()) * (1.0 - spec.mixing_ratio) / spec.mixing_ratio));
    clean_lines = std::max(clean_lines, mixed);
  }

  std::set<std::vector<int>> train_text;
  corpus.train = std::move(secret_lines);
  while (train_text.size() < clean_lines) {
    std::vector<int> line = grammar_line(rng, spec.line_len);
    if (train_text.insert(line).second) corpus.train.push_back(std::move(line));
  }

  // Fisher-Yates so secret and clean lines interleave deterministically.
  for (std::size_t i = corpus.train.size(); i > 1; --i)
    std::swap(corpus.train[i - 1], corpus.train[rng.next_below(i)]);

  // Clean held-out split, verbatim-disjoint from training text.
  std::set<std::vector<int>> eval_text;
  while (corpus.eval.size() < spec.eval_lines) {
    std::vector<int> line = grammar_line(rng, spec.line_len);
    if (train_text.count(line) == 0 && eval_text.insert(line).second)
      corpus.eval.push_back(std::move(line));
  }
  return corpus;
}

void ClassifierSetSpec::validate() const {
  if (n_classes < 2) throw std::invalid_argument("ClassifierSetSpec: need at least 2 classes");
  if (n_train == 0 || n_val == 0 || input_dim == 0)
    throw std::invalid_argument("ClassifierSetSpec: sizes must be positive");
  if (!(noise_fraction >= 0.0 && noise_fraction < 0.5))
    throw std::invalid_argument("ClassifierSetSpec: noise_fraction must be in [0, 0.5)");
  if (!(cluster_sep > 0.0))
    throw std::invalid_argument("ClassifierSetSpec: cluster_sep must be positive");
}

Json ClassifierSetSpec::to_json() const {
  return Json{{"seed", seed},
              {"n_classes", n_classes},
              {"n_train", n_train},
              {"n_val", n_val},
              {"input_dim", input_dim},
              {"cluster_sep", cluster_sep},
              {"noise_fraction", noise_fraction}};
}

ClassifierSetSpec ClassifierSetSpec::from_json(const Json& j) {
  ClassifierSetSpec s;
  s.seed = j.value("seed", s.seed);
  s.n_classes = j.value("n_classes", s.n_classes);
  s.n_train = j.value("n_train", s.n_train);
  s.n_val = j.value("n_val", s.n_val);
  s.input_dim = j.value("input_dim", s.input_dim);
  s.cluster_sep = j.value("cluster_sep", s.cluster_sep);
  s.noise_fraction = j.value("noise_fraction", s.noise_fraction);
  s.validate();
  return s;
}

ClassifierSet gen_classifier_set(const ClassifierSetSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  ClassifierSet set;
  set.class_means = Matrix(spec.n_classes, spec.input_dim);
  for (std::size_t i = 0; i < set.class_means.size(); ++i)
    set.class_means.data()[i] = spec.cluster_sep * rng.next_normal();

  const auto sample_split = [&](std::size_t n, Matrix& x, std::vector<int>& labels) {
    x = Matrix(n, spec.input_dim);
    labels.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t c = rng.next_below(spec.n_classes);
      labels[r] = static_cast<int>(c);
      for (std::size_t d = 0; d < spec.input_dim; ++d)
        x(r, d) = set.class_means(c, d) + rng.next_normal();
    }
  };
  sample_split(spec.n_train, set.train_x, set.train_true_labels);
  sample_split(spec.n_val, set.val_x, set.val_labels);

  set.train_labels = set.train_true_labels;
  const auto n_noise = static_cast<std::size_t>(
      std::llround(spec.noise_fraction * static_cast<double>(spec.n_train)));
  std::vector<std::size_t> order(spec.n_train);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);
  set.noised_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_noise));
  std::sort(set.noised_indices.begin(), set.noised_indices.end());
  for (const std::size_t idx : set.noised_indices) {
    std::size_t wrong = rng.next_below(spec.n_classes - 1);
    if (wrong >= static_cast<std::size_t>(set.train_true_labels[idx])) ++wrong;
    set.train_labels[idx] = static_cast<int>(wrong);
  }
  return set;
}

void save_token_lines(const std::string& path, const std::vector<std::vector<int>>& lines) {
  std::ostringstream os;
  for (const auto& line : lines) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i) os << ' ';
      os << line[i];
    }
    os << '\n';
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_token_lines: cannot open " + tmp);
    f << os.str();
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("save_token_lines: rename failed for " + path);
}

std::vector<std::vector<int>> load_token_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_token_lines: cannot open " + path);
  std::vector<std::vector<int>> lines;
  std::string row;
  while (std::getline(f, row)) {
    if (row.empty()) continue;
    std::istringstream is(row);
    std::vector<int> line;
    int tok = 0;
    while (is >> tok) line.push_back(tok);
    lines.push_back(std::move(line));
  }
  return lines;
}

void save_mem_pairs(const std::string& path, const std::vector<MemPair>& pairs) {
  Json j = Json::array();
  for (const auto& p : pairs) j.push_back(p.to_json());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_mem_pairs: cannot open " + tmp);
    f << j.dump(2) << '\n';
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("save_mem_pairs: rename failed for " + path);
}

std::vector<MemPair> load_mem_pairs(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_mem_pairs: cannot open " + path);
  Json j;
  f >> j;
  std::vector<MemPair> pairs;
  for (const auto& item : j) pairs.push_back(MemPair::from_json(item));
  return pairs;
}

namespace {

Matrix labels_to_row(const std::vector<int>& labels) {
  Matrix m(1, std::max<std::size_t>(labels.size(), 1));
  for (std::size_t i = 0; i < labels.size(); ++i) m(0, i) = labels[i];
  return m;
}

Matrix indices_to_row(const std::vector<std::size_t>& idx) {
  Matrix m(1, std::max<std::size_t>(idx.size(), 1));
  for (std::size_t i = 0; i < idx.size(); ++i) m(0, i) = static_cast<double>(idx[i]);
  return m;
}

std::vector<int> row_to_labels(const Matrix& m, std::size_t n) {
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<int>(std::llround(m(0, i)));
  return out;
}

}  // namespace

void save_classifier_set(const std::string& path, const ClassifierSet& set) {
  Json header;
  header["kind"] = "classifier_set";
  header["n_train"] = set.train_x.rows();
  header["n_val"] = set.val_x.rows();
  header["n_noised"] = set.noised_indices.size();
  save_container(path, header,
                 {{"train_x", set.train_x},
                  {"train_labels", labels_to_row(set.train_labels)},
                  {"train_true_labels", labels_to_row(set.train_true_labels)},
                  {"noised_indices", indices_to_row(set.noised_indices)},
                  {"val_x", set.val_x},
                  {"val_labels", labels_to_row(set.val_labels)},
                  {"class_means", set.class_means}});
}

ClassifierSet load_classifier_set(const std::string& path) {
  const Container c = load_container(path);
  ClassifierSet set;
  set.train_x = c.tensor("train_x");
  set.val_x = c.tensor("val_x");
  set.class_means = c.tensor("class_means");
  set.train_labels = row_to_labels(c.tensor("train_labels"), set.train_x.rows());
  set.train_true_labels = row_to_labels(c.tensor("train_true_labels"), set.train_x.rows());
  set.val_labels = row_to_labels(c.tensor("val_labels"), set.val_x.rows());
  const auto n_noised = c.header.at("n_noised").get<std::size_t>();
  const Matrix& idx = c.tensor("noised_indices");
  set.noised_indices.resize(n_noised);
  for (std::size_t i = 0; i < n_noised; ++i)
    set.noised_indices[i] = static_cast<std::size_t>(std::llround(idx(0, i)));
  return set;
}

double bigram_logloss(const std::vector<std::vector<int>>& fit_corpus,
                      const std::vector<std::vector<int>>& sequences, std::size_t vocab) {
  if (vocab == 0) throw std::invalid_argument("bigram_logloss: vocab must be positive");
  std::vector<double> counts(vocab * vocab, 1.0);  // add-one smoothing
  std::vector<double> totals(vocab, static_cast<double>(vocab));
  for (const auto& seq : fit_corpus) {
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      counts[static_cast<std::size_t>(seq[t]) * vocab + static_cast<std::size_t>(seq[t + 1])] += 1.0;
      totals[static_cast<std::size_t>(seq[t])] += 1.0;
    }
  }
  double loss = 0.0;
  std::size_t n = 0;
  for (const auto& seq : sequences) {
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      const double p =
          counts[static_cast<std::size_t>(seq[t]) * vocab + static_cast<std::size_t>(seq[t + 1])] /
          totals[static_cast<std::size_t>(seq[t])];
      loss -= std::log(p);
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("bigram_logloss: no transitions to score");
  return loss / static_cast<double>(n);
}

}  // namespace curvedit
