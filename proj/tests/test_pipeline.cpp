#include <curvedit/pipeline.hpp>
#include <curvedit/rng.hpp>

#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace curvedit;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

/// Tiny configuration that runs all eight stages in a few seconds.
RunConfig tiny_config(const std::string& workdir) {
  RunConfig c = RunConfig::defaults();
  c.workdir = workdir;
  c.corpus.secret_count = 4;
  c.corpus.repetitions = 8;
  c.corpus.min_clean_lines = 32;
  c.corpus.eval_lines = 8;
  c.classifier_data.n_train = 64;
  c.classifier_data.n_val = 32;
  c.lm_arch.n_layers = 2;
  c.lm_arch.d_model = 16;
  c.lm_arch.n_heads = 2;
  c.lm_arch.d_mlp = 32;
  c.classifier_arch.d_hidden = 16;
  c.classifier_arch.d_mlp = 32;
  c.classifier_arch.n_blocks = 2;
  c.lm_train.steps = 25;
  c.classifier_train.steps = 25;
  c.kfac_lines = 24;
  c.lm_kfac_plan.targets = {"layer1.gate", "layer1.up"};
  c.lm_svd_plan.targets = c.lm_kfac_plan.targets;
  c.lm_bsn_plan.targets = c.lm_kfac_plan.targets;
  c.lm_bsn_plan.bsn.epochs = 2;
  c.classifier_plan.targets = {"layer0.gate", "layer1.up"};
  c.sweep_rhos = {0.5, 0.75, 1.0};
  return c;
}

struct TempDir {
  fs::path dir;
  explicit TempDir(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string str() const { return dir.string(); }
};

}  // namespace

TEST_CASE("stage names round-trip and unknown names are config errors") {
  for (const Stage s : {Stage::GenData, Stage::Train, Stage::KfacCollect, Stage::AnalyzeBands,
                        Stage::Edit, Stage::Eval, Stage::Sweep, Stage::Report})
    CHECK(stage_from_name(stage_name(s)) == s);
  CHECK_THROWS_AS(stage_from_name("compile"), ConfigError);
}

TEST_CASE("band spec serialization round-trips and rejects unknown bases") {
  BandSpec spec;
  spec.basis = BandSpec::Basis::SvdRight;
  const BandSpec back = band_spec_from_json(band_spec_to_json(spec));
  CHECK(back.basis == BandSpec::Basis::SvdRight);
  CHECK(back.bands == spec.bands);
  Json bad = band_spec_to_json(spec);
  bad["basis"] = "fourier";
  CHECK_THROWS(band_spec_from_json(bad));
}

TEST_CASE("run config round-trips losslessly through JSON") {
  RunConfig c = tiny_config("/tmp/does-not-matter");
  c.seed = 77;
  c.lm_kfac_plan.rho = 0.55;
  c.sweep_rhos = {0.4, 0.9};
  const RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json().dump() == c.to_json().dump());
  CHECK(back.config_hash() == c.config_hash());
  RunConfig other = c;
  other.lm_kfac_plan.rho = 0.56;
  CHECK(other.config_hash() != c.config_hash());
}

TEST_CASE("malformed configs are reported as config errors") {
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/config.json"), ConfigError);
  TempDir tmp("curvedit_cfg_test");
  const std::string bad = (tmp.dir / "bad.json").string();
  write_text_atomic(bad, "{ not json");
  CHECK_THROWS_AS(RunConfig::load(bad), ConfigError);
  const std::string invalid = (tmp.dir / "invalid.json").string();
  write_text_atomic(invalid, R"({"lm_arch": {"d_model": 10, "n_heads": 4}})");
  CHECK_THROWS_AS(RunConfig::load(invalid), ConfigError);
}

TEST_CASE("stages fail fast with a missing-artifact error on an empty workdir") {
  TempDir tmp("curvedit_missing_test");
  const RunConfig c = tiny_config(tmp.str());
  for (const Stage s : {Stage::Train, Stage::KfacCollect, Stage::AnalyzeBands, Stage::Edit,
                        Stage::Eval, Stage::Sweep, Stage::Report})
    CHECK_THROWS_AS(run_stage(s, c), MissingArtifactError);
}

TEST_CASE("atomic writes land complete and hash like their contents") {
  TempDir tmp("curvedit_atomic_test");
  const std::string path = (tmp.dir / "artifact.txt").string();
  const std::string text = "hello artifact\n";
  write_text_atomic(path, text);
  CHECK(read_file(path) == text);
  CHECK(!fs::exists(path + ".tmp"));
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(text.data(), text.size())));
  CHECK(file_hash_hex(path) == hex);
  CHECK_THROWS_AS(file_hash_hex((tmp.dir / "absent").string()), MissingArtifactError);
}

TEST_CASE("tiny end-to-end run produces every artifact, manifest, and report") {
  TempDir tmp("curvedit_e2e_test");
  const RunConfig c = tiny_config(tmp.str());
  for (const Stage s : {Stage::GenData, Stage::Train, Stage::KfacCollect, Stage::AnalyzeBands,
                        Stage::Edit, Stage::Eval, Stage::Sweep, Stage::Report})
    run_stage(s, c, 2);

  for (const char* name :
       {"corpus_train.txt", "corpus_eval.txt", "pairs.json", "classifier_set.bin", "lm_model.ckpt",
        "classifier_model.ckpt", "band_report.csv", "lm_edited_kfac.ckpt", "lm_edited_svd.ckpt",
        "lm_edited_bsn.ckpt", "classifier_edited.ckpt", "edit_summary.json", "eval_report.json",
        "pair_details_baseline.csv", "pair_details_kfac.csv", "pair_details_svd.csv",
        "pair_details_bsn.csv", "sweep.csv", "report.json"})
    CHECK_MESSAGE(fs::exists(c.path(name)), name);

  // manifests carry provenance: tool version, config hash, input hashes
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(c.config_hash()));
  for (const char* stage : {"gen-data", "train", "kfac-collect", "analyze-bands", "edit", "eval",
                            "sweep", "report"}) {
    const Json m = Json::parse(read_file(c.path(std::string("manifest_") + stage + ".json")));
    CHECK(m.at("stage") == stage);
    CHECK(m.at("tool_version") == kToolVersion);
    CHECK(m.at("config_hash") == hex);
    CHECK(m.contains("inputs"));
    CHECK(!m.at("outputs").empty());
    CHECK(m.at("timestamp_unix").get<std::int64_t>() > 0);
    for (const auto& [artifact, hash] : m.at("inputs").items())
      CHECK(file_hash_hex(c.path(artifact)) == hash.get<std::string>());
  }

  const Json eval_json = Json::parse(read_file(c.path("eval_report.json")));
  for (const char* model : {"baseline", "kfac", "svd", "bsn"}) {
    const Json& e = eval_json.at("models").at(model);
    CHECK(e.at("memorization").contains("strict"));
    CHECK(e.at("perplexity").get<double>() > 0.0);
    CHECK(e.at("ndcg").get<double>() >= 0.0);
    CHECK(e.at("stress").contains("perturbed_mean"));
  }
  CHECK(eval_json.at("models").at("baseline").at("ndcg").get<double>() ==
        doctest::Approx(1.0));
  for (const char* model : {"baseline", "edited"})
    CHECK(eval_json.at("classifier").at(model).contains("memorized_train_acc"));

  const std::string sweep = read_file(c.path("sweep.csv"));
  CHECK(sweep.find("rho,strict,loose,avg_norm_lev,perplexity\n") == 0);
  CHECK(static_cast<std::size_t>(std::count(sweep.begin(), sweep.end(), '\n')) ==
        1 + c.sweep_rhos.size());

  const Json report = Json::parse(read_file(c.path("report.json")));
  CHECK(report.at("tool_version") == kToolVersion);
  CHECK(report.at("eval").at("models").contains("kfac"));
  CHECK(report.at("band_report_csv").get<std::string>().find("layer,basis") == 0);
  CHECK(report.contains("sweep_csv"));

  SUBCASE("re-running is deterministic: artifacts are byte-identical") {
    TempDir tmp2("curvedit_e2e_test_b");
    RunConfig c2 = tiny_config(tmp2.str());
    for (const Stage s : {Stage::GenData, Stage::Train, Stage::KfacCollect, Stage::AnalyzeBands,
                          Stage::Edit, Stage::Sweep})
      run_stage(s, c2, 1);
    for (const char* name : {"corpus_train.txt", "pairs.json", "lm_model.ckpt",
                             "lm_edited_kfac.ckpt", "band_report.csv", "sweep.csv"})
      CHECK_MESSAGE(read_file(c.path(name)) == read_file(c2.path(name)), name);
  }
}
