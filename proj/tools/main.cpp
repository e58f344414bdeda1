// Command-line front end: one subcommand per pipeline stage, JSON config
// with dotted-path overrides, exit codes 2 (missing artifact), 3 (bad
// config), 4 (numeric failure).

#include <curvedit/pipeline.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using curvedit::Json;

/// Applies "a.b.c=value" onto a JSON document; the value is parsed as
/// JSON when possible, otherwise taken as a string.
void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw curvedit::ConfigError("override must look like path.to.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw curvedit::ConfigError("override has an empty path segment: " + path);
    if (dot == std::string::npos) {
      node = &(*node)[key];
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
  const Json parsed = Json::parse(raw, nullptr, false);
  *node = parsed.is_discarded() ? Json(raw) : parsed;
}

curvedit::RunConfig build_config(const std::string& config_path, const std::string& workdir,
                                 const std::vector<std::string>& overrides) {
  Json doc = curvedit::RunConfig::defaults().to_json();
  if (!config_path.empty()) {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) throw curvedit::ConfigError("config: cannot open " + config_path);
    Json file_doc;
    try {
      f >> file_doc;
    } catch (const Json::exception& e) {
      throw curvedit::ConfigError(std::string("config: ") + e.what());
    }
    doc.merge_patch(file_doc);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  curvedit::RunConfig config = curvedit::RunConfig::from_json(doc);
  if (!workdir.empty()) config.workdir = workdir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loss-curvature weight editing pipeline"};
  app.set_version_flag("--version", curvedit::kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();  // global options may appear after the subcommand

  std::string config_path;
  std::string workdir;
  std::vector<std::string> overrides;
  std::size_t jobs = 1;
  app.add_option("--config", config_path, "JSON run configuration")->capture_default_str();
  app.add_option("--workdir", workdir, "artifact directory (overrides config and env)");
  app.add_option("--set", overrides, "dotted-path config override, e.g. lm_train.steps=500");
  app.add_option("--jobs", jobs, "sweep parallelism")->capture_default_str();

  const std::vector<std::string> stages = {"gen-data", "train",  "kfac-collect", "analyze-bands",
                                           "edit",     "eval",   "sweep",        "report"};
  for (const auto& s : stages) app.add_subcommand(s);
  app.add_subcommand("print-config", "emit the effective configuration and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    const curvedit::RunConfig config = build_config(config_path, workdir, overrides);
    const std::string chosen = app.get_subcommands().front()->get_name();
    if (chosen == "print-config") {
      std::cout << config.to_json().dump(2) << "\n";
      return 0;
    }
    curvedit::run_stage(curvedit::stage_from_name(chosen), config, std::max<std::size_t>(jobs, 1));
    std::cerr << chosen << ": ok\n";
    return 0;
  } catch (const curvedit::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const curvedit::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const curvedit::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
