#pragma once

#include "curvedit/datagen.hpp"
#include "curvedit/editing.hpp"
#include "curvedit/evalmem.hpp"
#include "curvedit/spectral.hpp"
#include "curvedit/train.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace curvedit {

inline constexpr const char* kToolVersion = "0.1.0";

/// A stage prerequisite is missing on disk (CLI maps this to exit 2).
class MissingArtifactError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The run configuration is malformed (CLI maps this to exit 3).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

Json band_spec_to_json(const BandSpec& spec);
BandSpec band_spec_from_json(const Json& j);

/// Everything a full run needs; round-trips losslessly through JSON.
/// Artifact paths are derived from workdir with fixed names.
struct RunConfig {
  std::string workdir = ".";
  std::uint64_t seed = 1;

  LmCorpusSpec corpus;
  ClassifierSetSpec classifier_data;
  ArchSpec lm_arch;
  ArchSpec classifier_arch;
  TrainConfig lm_train;
  TrainConfig classifier_train;

  std::uint64_t kfac_seed = 21;
  std::size_t kfac_lines = 3200;  // training lines used for factor statistics (~200k positions)

  BandSpec bands;
  EditPlan lm_kfac_plan;
  EditPlan lm_svd_plan;
  EditPlan lm_bsn_plan;
  EditPlan classifier_plan;

  std::vector<double> sweep_rhos = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::size_t ndcg_k = 10;
  // Matches the corpus's secret-offset range so the perturbation stays
  // in-distribution for the positional-recovery comparison.
  std::size_t stress_max_shift = 8;

  /// Desk-scale defaults; workdir from CURVEDIT_WORKDIR when set.
  static RunConfig defaults();

  Json to_json() const;
  static RunConfig from_json(const Json& j);
  /// Throws ConfigError on malformed JSON or invalid field values.
  static RunConfig load(const std::string& path);

  std::string path(const std::string& artifact) const;
  std::uint64_t config_hash() const;
};

enum class Stage { GenData, Train, KfacCollect, AnalyzeBands, Edit, Eval, Sweep, Report };

Stage stage_from_name(const std::string& name);
std::string stage_name(Stage stage);

/// Runs one stage against the artifacts in config.workdir. Verifies all
/// prerequisites up front (MissingArtifactError names the first missing
/// file), writes every artifact atomically, and drops a
/// manifest_<stage>.json recording input hashes, the config hash, and the
/// tool version, with the wall-clock timestamp in its own field. `jobs`
/// bounds sweep parallelism; results merge in config order regardless.
void run_stage(Stage stage, const RunConfig& config, std::size_t jobs = 1);

/// Atomic text write (temp file + rename), shared by stages and tools.
void write_text_atomic(const std::string& path, const std::string& text);

/// FNV-1a content hash of a file, hex-encoded (manifest entries).
std::string file_hash_hex(const std::string& path);

}  // namespace curvedit
