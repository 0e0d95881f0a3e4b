#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "bgen/inference.hpp"
#include "bgen/trainer.hpp"

namespace bgen {

// ---- run plumbing ----
//
// One invocation = one subcommand + an optional JSON config file + flag
// overrides. Flags win over file values; the merged ("effective") config is
// echoed into the output directory so every run is reproducible from its
// artifacts alone.

struct RunConfig {
  std::string command;
  std::string config_path;  // optional JSON file; empty = flags only
  std::string out_dir;
  nlohmann::ordered_json overrides = nlohmann::ordered_json::object();
};

// File values overlaid with flag overrides, plus the command and output
// directory stamped in. Throws if the file is missing or not a JSON object.
nlohmann::ordered_json effective_config(const RunConfig& rc);

// Assigns through a dotted path ("train.total"), creating intermediate
// objects as needed; backs the --set flag.
void set_config_path(nlohmann::ordered_json& config, const std::string& dotted_key,
                     const nlohmann::ordered_json& value);

// Creates the output directory, echoes effective_config.json, dispatches to
// the matching cmd_* entry point, and prints a one-line result. Returns the
// process exit code: 0 success, 2 configuration or input error, 3 numerical
// failure during training.
int run_command(const RunConfig& rc);

// ---- subcommand entry points ----

// Synthesizes task corpora from a generation spec: per-task train/val files,
// the shared vocabulary, a ready-to-train task registry, and a stats table
// (sentences, unrolled examples, ratio) per task.
struct SynthReport {
  std::vector<std::string> corpus_paths;
  std::string vocab_path;
  std::string tasks_path;
  std::string stats_path;
};
SynthReport cmd_synthdata(const nlohmann::ordered_json& cfg, const std::string& out_dir);

// Runs the training loop described by the config: model + schedule + task
// registry, optional resume checkpoint or hybrid-init donor checkpoints.
TrainSummary cmd_train(const nlohmann::ordered_json& cfg, const std::string& out_dir);

// Greedy-decodes an input corpus under a checkpoint; returns the hypotheses
// file path (one line per input). Unseen directions require zero_shot=true.
std::string cmd_decode(const nlohmann::ordered_json& cfg, const std::string& out_dir);

// Scores hypotheses against references (plain mode) or runs the congruence /
// zero-shot protocols against a checkpoint; writes eval_report.json.
EvalReport cmd_eval(const nlohmann::ordered_json& cfg, const std::string& out_dir);

// Drives the initialization or multi-task ablation and writes the combined
// summary table.
AblationResult cmd_ablate(const nlohmann::ordered_json& cfg, const std::string& out_dir);

}  // namespace bgen
