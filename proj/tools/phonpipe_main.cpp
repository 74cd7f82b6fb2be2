// phonpipe: batch pipeline turning aligned speech annotations plus audio
// into per-phoneme records with acoustic features and phoneme-level
// language-model information measures.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "phonpipe/error.hpp"
#include "phonpipe/pipeline.hpp"

namespace {

struct GlobalFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  long long seed = -1;
  int jobs = 0;
  bool strict = false;
  bool lenient = false;
  bool dry_run = false;
};

phonpipe::pipeline::Config build_config(const GlobalFlags& g) {
  phonpipe::pipeline::Config cfg;
  if (!g.config_path.empty()) {
    cfg = phonpipe::pipeline::Config::load_file(g.config_path);
  }
  // Flags win over the file.
  for (const std::string& kv : g.overrides) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw phonpipe::ConfigError("--set expects key=value, got: " + kv);
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed >= 0) cfg.set("run.seed", std::to_string(g.seed));
  if (g.jobs > 0) cfg.set("run.jobs", std::to_string(g.jobs));
  if (g.strict && g.lenient) {
    throw phonpipe::ConfigError("--strict and --lenient are exclusive");
  }
  if (g.strict) cfg.set("run.mode", "strict");
  if (g.lenient) cfg.set("run.mode", "lenient");
  return cfg;
}

void add_global_flags(CLI::App* app, GlobalFlags& g) {
  app->add_option("--config", g.config_path, "Configuration file (key = value lines)");
  app->add_option("--set", g.overrides, "Override a config key (key=value), repeatable");
  app->add_option("--seed", g.seed, "Random seed (overrides run.seed)");
  app->add_option("--jobs", g.jobs, "Parallel batch workers (default: cores)");
  app->add_flag("--strict", g.strict, "Fail on unmapped labels and divergences (default)");
  app->add_flag("--lenient", g.lenient, "Skip and count problems instead of failing");
  app->add_flag("--dry-run", g.dry_run, "Validate configuration and inputs, write nothing");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phoneme-level speech corpus pipeline"};
  app.require_subcommand(1);

  GlobalFlags g;
  add_global_flags(&app, g);

  auto* ingest = app.add_subcommand(
      "ingest", "Clean and phonemize a text corpus into token datasets");
  add_global_flags(ingest, g);

  auto* train = app.add_subcommand(
      "train", "Train the phoneme language model on ingested datasets");
  add_global_flags(train, g);

  std::string surprisal_input;
  std::string surprisal_out;
  bool surprisal_ids = false;
  auto* surprisal = app.add_subcommand(
      "surprisal", "Per-token surprisal/entropy table for an IPA input");
  add_global_flags(surprisal, g);
  surprisal->add_option("--input", surprisal_input, "IPA text file (or token-id .bin with --ids)")
      ->required();
  surprisal->add_flag("--ids", surprisal_ids, "Input is a binary token-id dataset");
  surprisal->add_option("--out", surprisal_out, "Output CSV path");
  surprisal->add_option("--window", [&g](const std::vector<std::string>& v) {
    g.overrides.push_back("surprisal.window=" + v[0]);
    return true;
  }, "Rolling context window in tokens (default 10)");

  auto* extract = app.add_subcommand(
      "extract", "Acoustic feature tracks for (wav, TextGrid) pairs");
  add_global_flags(extract, g);

  auto* merge = app.add_subcommand(
      "merge", "Join intervals, features, and information measures into CSV");
  add_global_flags(merge, g);

  auto* pipeline_cmd = app.add_subcommand(
      "pipeline", "Run ingest, train, extract, and merge in sequence");
  add_global_flags(pipeline_cmd, g);

  CLI11_PARSE(app, argc, argv);

  try {
    const phonpipe::pipeline::Config cfg = build_config(g);
    if (ingest->parsed()) {
      return phonpipe::pipeline::cmd_ingest(cfg, g.dry_run, std::cout);
    }
    if (train->parsed()) {
      return phonpipe::pipeline::cmd_train(cfg, g.dry_run, std::cout);
    }
    if (surprisal->parsed()) {
      return phonpipe::pipeline::cmd_surprisal(cfg, surprisal_input,
                                               surprisal_ids, surprisal_out,
                                               g.dry_run, std::cout);
    }
    if (extract->parsed()) {
      return phonpipe::pipeline::cmd_extract(cfg, g.dry_run, std::cout);
    }
    if (merge->parsed()) {
      return phonpipe::pipeline::cmd_merge(cfg, g.dry_run, std::cout);
    }
    if (pipeline_cmd->parsed()) {
      return phonpipe::pipeline::cmd_pipeline(cfg, g.dry_run, std::cout);
    }
  } catch (const phonpipe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
