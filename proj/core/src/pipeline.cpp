#include "curvedit/pipeline.hpp"

#include "curvedit/kfac.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace curvedit {

namespace fs = std::filesystem;

Json band_spec_to_json(const BandSpec& spec) {
  Json bands = Json::array();
  for (const auto& [lo, hi] : spec.bands) bands.push_back({lo, hi});
  return Json{{"basis", spec.basis == BandSpec::Basis::KfacA ? "kfac_a" : "svd_right"},
              {"bands", bands}};
}

BandSpec band_spec_from_json(const Json& j) {
  BandSpec spec;
  const std::string basis = j.value("basis", std::string("kfac_a"));
  if (basis == "kfac_a") {
    spec.basis = BandSpec::Basis::KfacA;
  } else if (basis == "svd_right") {
    spec.basis = BandSpec::Basis::SvdRight;
  } else {
    throw std::invalid_argument("band spec: unknown basis " + basis);
  }
  if (j.contains("bands")) {
    spec.bands.clear();
    for (const auto& b : j["bands"]) spec.bands.emplace_back(b.at(0), b.at(1));
  }
  spec.validate();
  return spec;
}

namespace {

std::vector<std::string> gate_up_targets(std::size_t first_layer, std::size_t last_layer) {
  std::vector<std::string> t;
  for (std::size_t i = first_layer; i <= last_layer; ++i) {
    t.push_back("layer" + std::to_string(i) + ".gate");
    t.push_back("layer" + std::to_string(i) + ".up");
  }
  return t;
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  if (const char* env = std::getenv("CURVEDIT_WORKDIR"); env != nullptr && env[0] != '\0')
    c.workdir = env;

  c.lm_arch.kind = ArchSpec::Kind::Lm;
  c.classifier_arch.kind = ArchSpec::Kind::Classifier;

  c.lm_train.steps = 4000;
  c.lm_train.batch_size = 16;
  c.lm_train.learning_rate = 1e-3;
  c.lm_train.schedule = TrainConfig::Schedule::Cosine;
  c.lm_train.seed = 2;

  c.classifier_train.steps = 3000;
  c.classifier_train.batch_size = 32;
  c.classifier_train.learning_rate = 1e-3;
  c.classifier_train.weight_decay = 0.3;
  c.classifier_train.seed = 3;

  // lm edit: gate/up of the last three blocks
  const std::size_t last = c.lm_arch.n_layers - 1;
  const std::size_t first = c.lm_arch.n_layers >= 3 ? c.lm_arch.n_layers - 3 : 0;
  c.lm_kfac_plan.method = EditPlan::Method::KfacPairs;
  c.lm_kfac_plan.targets = gate_up_targets(first, last);
  c.lm_kfac_plan.rho = 0.6;

  c.lm_svd_plan.method = EditPlan::Method::SvdTruncate;
  c.lm_svd_plan.targets = c.lm_kfac_plan.targets;
  c.lm_svd_plan.keep_fraction = 0.5;

  c.lm_bsn_plan.method = EditPlan::Method::BsnMask;
  c.lm_bsn_plan.targets = c.lm_kfac_plan.targets;

  // classifier edit: first and last block
  c.classifier_plan.method = EditPlan::Method::KfacPairs;
  c.classifier_plan.rho = 0.75;
  c.classifier_plan.targets = {"layer0.gate", "layer0.up",
                               "layer" + std::to_string(c.classifier_arch.n_blocks - 1) + ".gate",
                               "layer" + std::to_string(c.classifier_arch.n_blocks - 1) + ".up"};
  return c;
}

Json RunConfig::to_json() const {
  Json j;
  j["workdir"] = workdir;
  j["seed"] = seed;
  j["corpus"] = corpus.to_json();
  j["classifier_data"] = classifier_data.to_json();
  j["lm_arch"] = lm_arch.to_json();
  j["classifier_arch"] = classifier_arch.to_json();
  j["lm_train"] = lm_train.to_json();
  j["classifier_train"] = classifier_train.to_json();
  j["kfac_seed"] = kfac_seed;
  j["kfac_lines"] = kfac_lines;
  j["bands"] = band_spec_to_json(bands);
  j["lm_kfac_plan"] = lm_kfac_plan.to_json();
  j["lm_svd_plan"] = lm_svd_plan.to_json();
  j["lm_bsn_plan"] = lm_bsn_plan.to_json();
  j["classifier_plan"] = classifier_plan.to_json();
  j["sweep_rhos"] = sweep_rhos;
  j["ndcg_k"] = ndcg_k;
  j["stress_max_shift"] = stress_max_shift;
  return j;
}

RunConfig RunConfig::from_json(const Json& j) {
  try {
    RunConfig c = defaults();
    c.workdir = j.value("workdir", c.workdir);
    c.seed = j.value("seed", c.seed);
    if (j.contains("corpus")) c.corpus = LmCorpusSpec::from_json(j["corpus"]);
    if (j.contains("classifier_data"))
      c.classifier_data = ClassifierSetSpec::from_json(j["classifier_data"]);
    if (j.contains("lm_arch")) c.lm_arch = ArchSpec::from_json(j["lm_arch"]);
    if (j.contains("classifier_arch")) c.classifier_arch = ArchSpec::from_json(j["classifier_arch"]);
    if (j.contains("lm_train")) c.lm_train = TrainConfig::from_json(j["lm_train"]);
    if (j.contains("classifier_train"))
      c.classifier_train = TrainConfig::from_json(j["classifier_train"]);
    c.kfac_seed = j.value("kfac_seed", c.kfac_seed);
    c.kfac_lines = j.value("kfac_lines", c.kfac_lines);
    if (j.contains("bands")) c.bands = band_spec_from_json(j["bands"]);
    if (j.contains("lm_kfac_plan")) c.lm_kfac_plan = EditPlan::from_json(j["lm_kfac_plan"]);
    if (j.contains("lm_svd_plan")) c.lm_svd_plan = EditPlan::from_json(j["lm_svd_plan"]);
    if (j.contains("lm_bsn_plan")) c.lm_bsn_plan = EditPlan::from_json(j["lm_bsn_plan"]);
    if (j.contains("classifier_plan"))
      c.classifier_plan = EditPlan::from_json(j["classifier_plan"]);
    if (j.contains("sweep_rhos")) c.sweep_rhos = j["sweep_rhos"].get<std::vector<double>>();
    c.ndcg_k = j.value("ndcg_k", c.ndcg_k);
    c.stress_max_shift = j.value("stress_max_shift", c.stress_max_shift);
    c.lm_arch.validate();
    c.classifier_arch.validate();
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot open " + path);
  Json j;
  try {
    f >> j;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return from_json(j);
}

std::string RunConfig::path(const std::string& artifact) const {
  return (fs::path(workdir) / artifact).string();
}

std::uint64_t RunConfig::config_hash() const {
  const std::string dump = to_json().dump();
  return fnv1a64(dump.data(), dump.size());
}

Stage stage_from_name(const std::string& name) {
  if (name == "gen-data") return Stage::GenData;
  if (name == "train") return Stage::Train;
  if (name == "kfac-collect") return Stage::KfacCollect;
  if (name == "analyze-bands") return Stage::AnalyzeBands;
  if (name == "edit") return Stage::Edit;
  if (name == "eval") return Stage::Eval;
  if (name == "sweep") return Stage::Sweep;
  if (name == "report") return Stage::Report;
  throw ConfigError("unknown stage: " + name);
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::GenData: return "gen-data";
    case Stage::Train: return "train";
    case Stage::KfacCollect: return "kfac-collect";
    case Stage::AnalyzeBands: return "analyze-bands";
    case Stage::Edit: return "edit";
    case Stage::Eval: return "eval";
    case Stage::Sweep: return "sweep";
    case Stage::Report: return "report";
  }
  throw ConfigError("unknown stage enum value");
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_text_atomic: cannot open " + tmp);
    f << text;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("write_text_atomic: rename failed for " + path);
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifactError("missing artifact: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string bytes = buf.str();
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return hex;
}

namespace {

// Fixed artifact names inside the workdir.
constexpr const char* kCorpusTrain = "corpus_train.txt";
constexpr const char* kCorpusEval = "corpus_eval.txt";
constexpr const char* kPairs = "pairs.json";
constexpr const char* kClassifierSet = "classifier_set.bin";
constexpr const char* kLmModel = "lm_model.ckpt";
constexpr const char* kClassifierModel = "classifier_model.ckpt";
constexpr const char* kBandReport = "band_report.csv";
constexpr const char* kLmEditedKfac = "lm_edited_kfac.ckpt";
constexpr const char* kLmEditedSvd = "lm_edited_svd.ckpt";
constexpr const char* kLmEditedBsn = "lm_edited_bsn.ckpt";
constexpr const char* kClassifierEdited = "classifier_edited.ckpt";
constexpr const char* kEditSummary = "edit_summary.json";
constexpr const char* kEvalReport = "eval_report.json";
constexpr const char* kSweepCsv = "sweep.csv";
constexpr const char* kReport = "report.json";

std::string lm_factor_file(const std::string& layer) { return "factors_lm_" + layer + ".bin"; }
std::string cls_factor_file(const std::string& layer) { return "factors_cls_" + layer + ".bin"; }

void require_file(const RunConfig& config, const std::string& artifact,
                  std::vector<std::string>& inputs) {
  const std::string p = config.path(artifact);
  if (!fs::exists(p)) throw MissingArtifactError("missing artifact: " + p);
  inputs.push_back(artifact);
}

void write_manifest(const RunConfig& config, Stage stage, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  Json m;
  m["stage"] = stage_name(stage);
  m["tool_version"] = kToolVersion;
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(config.config_hash()));
  m["config_hash"] = hex;
  Json in = Json::object();
  for (const auto& artifact : inputs) in[artifact] = file_hash_hex(config.path(artifact));
  m["inputs"] = in;
  m["outputs"] = outputs;
  // Timestamp deliberately isolated so everything else is reproducible.
  m["timestamp_unix"] = std::chrono::duration_cast<std::chrono::seconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
  write_text_atomic(config.path("manifest_" + stage_name(stage) + ".json"), m.dump(2) + "\n");
}

std::vector<std::string> gate_targets(const EditPlan& plan) {
  std::vector<std::string> out;
  for (const auto& t : plan.targets) {
    if (t.size() > 5 && t.compare(t.size() - 5, 5, ".gate") == 0) out.push_back(t);
  }
  return out;
}

std::vector<std::vector<int>> pair_sequences(const std::vector<MemPair>& pairs) {
  std::vector<std::vector<int>> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    std::vector<int> seq = p.prefix;
    seq.insert(seq.end(), p.suffix.begin(), p.suffix.end());
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<KfacFactors> load_lm_factors(const RunConfig& config,
                                         const std::vector<std::string>& names,
                                         std::vector<std::string>& inputs) {
  std::vector<KfacFactors> factors;
  for (const auto& name : names) {
    require_file(config, lm_factor_file(name), inputs);
    factors.push_back(KfacFactors::load(config.path(lm_factor_file(name))));
  }
  return factors;
}

void run_gen_data(const RunConfig& config) {
  fs::create_directories(config.workdir);
  const LmCorpus corpus = gen_lm_corpus(config.corpus);
  save_token_lines(config.path(kCorpusTrain), corpus.train);
  save_token_lines(config.path(kCorpusEval), corpus.eval);
  save_mem_pairs(config.path(kPairs), corpus.pairs);
  const ClassifierSet set = gen_classifier_set(config.classifier_data);
  save_classifier_set(config.path(kClassifierSet), set);
  write_manifest(config, Stage::GenData, {},
                 {kCorpusTrain, kCorpusEval, kPairs, kClassifierSet});
}

void run_train(const RunConfig& config) {
  std::vector<std::string> inputs;
  require_file(config, kCorpusTrain, inputs);
  require_file(config, kClassifierSet, inputs);

  LmDataset data;
  data.sequences = load_token_lines(config.path(kCorpusTrain));
  for (const auto& seq : data.sequences) {
    if (seq.size() > config.lm_arch.context)
      throw ConfigError("train: corpus line exceeds model context");
  }
  ArchSpec lm_arch = config.lm_arch;
  lm_arch.kind = ArchSpec::Kind::Lm;
  const TrainResult lm = train_lm(lm_arch, data, config.lm_train);
  save_checkpoint(config.path(kLmModel), lm.checkpoint);

  const ClassifierSet set = load_classifier_set(config.path(kClassifierSet));
  ClassifierDataset cdata;
  cdata.x = set.train_x;
  cdata.labels = set.train_labels;  // noised labels: the memorization target
  ArchSpec cls_arch = config.classifier_arch;
  cls_arch.kind = ArchSpec::Kind::Classifier;
  const TrainResult cls = train_classifier(cls_arch, cdata, config.classifier_train);
  save_checkpoint(config.path(kClassifierModel), cls.checkpoint);

  write_manifest(config, Stage::Train, inputs, {kLmModel, kClassifierModel});
}

void run_kfac_collect(const RunConfig& config) {
  std::vector<std::string> inputs;
  require_file(config, kLmModel, inputs);
  require_file(config, kCorpusTrain, inputs);
  require_file(config, kClassifierModel, inputs);
  require_file(config, kClassifierSet, inputs);

  const ModelCheckpoint lm = load_checkpoint(config.path(kLmModel));
  std::vector<std::vector<int>> lines = load_token_lines(config.path(kCorpusTrain));
  if (lines.size() > config.kfac_lines) lines.resize(config.kfac_lines);
  const std::vector<KfacFactors> lm_factors =
      collect_lm_factors(lm, lines, LabelMode::ModelSampled, config.kfac_seed);
  std::vector<std::string> outputs;
  for (const KfacFactors& f : lm_factors) {
    f.save(config.path(lm_factor_file(f.layer_name())));
    outputs.push_back(lm_factor_file(f.layer_name()));
  }

  const ModelCheckpoint cls = load_checkpoint(config.path(kClassifierModel));
  const ClassifierSet set = load_classifier_set(config.path(kClassifierSet));
  const std::vector<KfacFactors> cls_factors =
      collect_classifier_factors(cls, set.train_x, LabelMode::ModelSampled, config.kfac_seed + 1);
  for (const KfacFactors& f : cls_factors) {
    f.save(config.path(cls_factor_file(f.layer_name())));
    outputs.push_back(cls_factor_file(f.layer_name()));
  }
  write_manifest(config, Stage::KfacCollect, inputs, outputs);
}

void run_analyze_bands(const RunConfig& config) {
  std::vector<std::string> inputs;
  require_file(config, kLmModel, inputs);
  require_file(config, kPairs, inputs);
  require_file(config, kCorpusEval, inputs);

  const ModelCheckpoint lm = load_checkpoint(config.path(kLmModel));
  const std::vector<MemPair> pairs = load_mem_pairs(config.path(kPairs));
  const std::vector<std::vector<int>> mem_set = pair_sequences(pairs);
  const std::vector<std::vector<int>> clean_set = load_token_lines(config.path(kCorpusEval));

  const std::vector<std::string> projections = gate_targets(config.lm_kfac_plan);
  const std::vector<KfacFactors> factors = load_lm_factors(config, projections, inputs);

  const BandReport report =
      activation_ratio_report(lm, factors, mem_set, clean_set, config.bands, projections);
  write_text_atomic(config.path(kBandReport), band_report_csv(report));
  write_manifest(config, Stage::AnalyzeBands, inputs, {kBandReport});
}

void run_edit(const RunConfig& config) {
  std::vector<std::string> inputs;
  require_file(config, kLmModel, inputs);
  require_file(config, kPairs, inputs);
  require_file(config, kCorpusEval, inputs);
  require_file(config, kClassifierModel, inputs);

  const ModelCheckpoint lm = load_checkpoint(config.path(kLmModel));
  const std::vector<KfacFactors> factors =
      load_lm_factors(config, config.lm_kfac_plan.targets, inputs);

  Json summary;
  const EditOutcome kfac = apply_weight_edit(lm, factors, config.lm_kfac_plan);
  save_checkpoint(config.path(kLmEditedKfac), kfac.edited);
  summary["lm_kfac"] = kfac.summary_json();

  const EditOutcome svd_out = apply_weight_edit(lm, {}, config.lm_svd_plan);
  save_checkpoint(config.path(kLmEditedSvd), svd_out.edited);
  summary["lm_svd"] = svd_out.summary_json();

  const std::vector<MemPair> pairs = load_mem_pairs(config.path(kPairs));
  std::vector<std::vector<int>> retain = load_token_lines(config.path(kCorpusEval));
  if (retain.size() > 32) retain.resize(32);
  const EditOutcome bsn = bsn_mask_edit(lm, pair_sequences(pairs), retain, config.lm_bsn_plan);
  save_checkpoint(config.path(kLmEditedBsn), bsn.edited);
  summary["lm_bsn"] = bsn.summary_json();

  const ModelCheckpoint cls = load_checkpoint(config.path(kClassifierModel));
  std::vector<KfacFactors> cls_factors;
  for (const auto& name : config.classifier_plan.targets) {
    require_file(config, cls_factor_file(name), inputs);
    cls_factors.push_back(KfacFactors::load(config.path(cls_factor_file(name))));
  }
  const EditOutcome cls_out = apply_weight_edit(cls, cls_factors, config.classifier_plan);
  save_checkpoint(config.path(kClassifierEdited), cls_out.edited);
  summary["classifier"] = cls_out.summary_json();

  write_text_atomic(config.path(kEditSummary), summary.dump(2) + "\n");
  write_manifest(config, Stage::Edit, inputs,
                 {kLmEditedKfac, kLmEditedSvd, kLmEditedBsn, kClassifierEdited, kEditSummary});
}

void run_eval(const RunConfig& config) {
  std::vector<std::string> inputs;
  require_file(config, kLmModel, inputs);
  require_file(config, kLmEditedKfac, inputs);
  require_file(config, kLmEditedSvd, inputs);
  require_file(config, kLmEditedBsn, inputs);
  require_file(config, kPairs, inputs);
  require_file(config, kCorpusEval, inputs);
  require_file(config, kClassifierModel, inputs);
  require_file(config, kClassifierEdited, inputs);
  require_file(config, kClassifierSet, inputs);

  const ModelCheckpoint baseline = load_checkpoint(config.path(kLmModel));
  const std::vector<MemPair> pairs = load_mem_pairs(config.path(kPairs));
  const std::vector<std::vector<int>> eval_lines = load_token_lines(config.path(kCorpusEval));

  Json models = Json::object();
  std::vector<std::string> outputs;
  const std::vector<std::pair<std::string, std::string>> model_files = {
      {"baseline", kLmModel},
      {"kfac", kLmEditedKfac},
      {"svd", kLmEditedSvd},
      {"bsn", kLmEditedBsn}};
  for (const auto& [name, file] : model_files) {
    const ModelCheckpoint model = load_checkpoint(config.path(file));
    const MemEvalReport mem = memorization_eval(model, pairs);
    Json entry;
    entry["memorization"] = mem.to_json();
    entry["perplexity"] = perplexity(model, eval_lines);
    entry["ndcg"] = ndcg_at_k(baseline, model, eval_lines, config.ndcg_k);
    const StressTestResult stress =
        positional_stress_test(model, pairs, config.stress_max_shift, config.seed + 41);
    entry["stress"] = Json{{"original_mean", stress.original_mean},
                           {"original_std", stress.original_std},
                           {"perturbed_mean", stress.perturbed_mean},
                           {"perturbed_std", stress.perturbed_std}};
    models[name] = entry;
    const std::string csv_name = "pair_details_" + name + ".csv";
    write_text_atomic(config.path(csv_name), pair_details_csv(mem));
    outputs.push_back(csv_name);
  }

  const ClassifierSet set = load_classifier_set(config.path(kClassifierSet));
  Matrix noised_x(set.noised_indices.size(), set.train_x.cols());
  std::vector<int> noised_labels, true_labels;
  for (std::size_t r = 0; r < set.noised_indices.size(); ++r) {
    const std::size_t idx = set.noised_indices[r];
    for (std::size_t c = 0; c < set.train_x.cols(); ++c) noised_x(r, c) = set.train_x(idx, c);
    noised_labels.push_back(set.train_labels[idx]);
    true_labels.push_back(set.train_true_labels[idx]);
  }
  Json classifier = Json::object();
  for (const auto& [name, file] : std::vector<std::pair<std::string, std::string>>{
           {"baseline", kClassifierModel}, {"edited", kClassifierEdited}}) {
    const ModelCheckpoint model = load_checkpoint(config.path(file));
    const ClassifierMemEval r = classifier_mem_eval(model, noised_x, noised_labels, true_labels,
                                                    set.val_x, set.val_labels);
    classifier[name] = Json{{"memorized_train_acc", r.memorized_train_acc},
                            {"gt_recovery_acc", r.gt_recovery_acc},
                            {"val_acc", r.val_acc}};
  }

  Json report;
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(config.config_hash()));
  report["config_hash"] = hex;
  report["models"] = models;
  report["classifier"] = classifier;
  write_text_atomic(config.path(kEvalReport), report.dump(2) + "\n");
  outputs.push_back(kEvalReport);
  write_manifest(config, Stage::Eval, inputs, outputs);
}

void run_sweep(const RunConfig& config, std::size_t jobs) {
  std::vector<std::string> inputs;
  require_file(config, kLmModel, inputs);
  require_file(config, kPairs, inputs);
  require_file(config, kCorpusEval, inputs);

  const ModelCheckpoint baseline = load_checkpoint(config.path(kLmModel));
  const std::vector<MemPair> pairs = load_mem_pairs(config.path(kPairs));
  const std::vector<std::vector<int>> eval_lines = load_token_lines(config.path(kCorpusEval));
  const std::vector<KfacFactors> factors =
      load_lm_factors(config, config.lm_kfac_plan.targets, inputs);

  struct Row {
    double rho, strict, loose, avg_norm_lev, ppl;
  };
  std::vector<Row> rows(config.sweep_rhos.size());
  std::vector<std::exception_ptr> errors(std::max<std::size_t>(jobs, 1));

  const auto worker = [&](std::size_t tid, std::size_t stride) {
    try {
      for (std::size_t i = tid; i < config.sweep_rhos.size(); i += stride) {
        EditPlan plan = config.lm_kfac_plan;
        plan.rho = config.sweep_rhos[i];
        const EditOutcome out = apply_weight_edit(baseline, factors, plan);
        const MemEvalReport mem = memorization_eval(out.edited, pairs);
        rows[i] = {plan.rho, mem.strict, mem.loose, mem.avg_norm_lev,
                   perplexity(out.edited, eval_lines)};
      }
    } catch (...) {
      errors[tid] = std::current_exception();
    }
  };

  if (jobs <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker, t, jobs);
    for (auto& th : threads) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::ostringstream csv;
  csv.precision(12);
  csv << "rho,strict,loose,avg_norm_lev,perplexity\n";
  for (const Row& r : rows)
    csv << r.rho << "," << r.strict << "," << r.loose << "," << r.avg_norm_lev << "," << r.ppl
        << "\n";
  write_text_atomic(config.path(kSweepCsv), csv.str());
  write_manifest(config, Stage::Sweep, inputs, {kSweepCsv});
}

void run_report(const RunConfig& config) {
  std::vector<std::string> inputs;
  require_file(config, kEvalReport, inputs);
  require_file(config, kBandReport, inputs);

  std::ifstream ef(config.path(kEvalReport), std::ios::binary);
  Json eval_json;
  ef >> eval_json;

  std::ifstream bf(config.path(kBandReport), std::ios::binary);
  std::ostringstream bands;
  bands << bf.rdbuf();

  Json report;
  report["tool_version"] = kToolVersion;
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(config.config_hash()));
  report["config_hash"] = hex;
  report["eval"] = eval_json;
  report["band_report_csv"] = bands.str();
  if (fs::exists(config.path(kSweepCsv))) {
    inputs.push_back(kSweepCsv);
    std::ifstream sf(config.path(kSweepCsv), std::ios::binary);
    std::ostringstream sweep;
    sweep << sf.rdbuf();
    report["sweep_csv"] = sweep.str();
  }
  write_text_atomic(config.path(kReport), report.dump(2) + "\n");
  write_manifest(config, Stage::Report, inputs, {kReport});
}

}  // namespace

void run_stage(Stage stage, const RunConfig& config, std::size_t jobs) {
  switch (stage) {
    case Stage::GenData: run_gen_data(config); return;
    case Stage::Train: run_train(config); return;
    case Stage::KfacCollect: run_kfac_collect(config); return;
    case Stage::AnalyzeBands: run_analyze_bands(config); return;
    case Stage::Edit: run_edit(config); return;
    case Stage::Eval: run_eval(config); return;
    case Stage::Sweep: run_sweep(config, jobs); return;
    case Stage::Report: run_report(config); return;
  }
  throw ConfigError("unknown stage enum value");
}

}  // namespace curvedit
