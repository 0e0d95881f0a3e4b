#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bgen/checkpoint.hpp"
#include "bgen/tasks.hpp"
#include "bgen/transformer.hpp"
#include "bgen/vocab.hpp"

namespace bgen {

// Non-finite numbers reached the optimizer or poisoned an ablation variant.
// The command-line driver maps this to its own exit code, distinct from
// configuration mistakes.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- learning-rate schedule ----

// Linear warmup to `base` at step `warmup`, then linear decay to 0 at
// `total`. Continuous and piecewise linear; lr_at(warmup) == base exactly.
double lr_at(long long step, double base, long long warmup, long long total);

// ---- optimizer ----

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct OptimizerState {
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  long long step = 0;
};

// One bias-corrected adaptive update from the gradients stored on `params`,
// then decoupled weight decay (each weight shrinks by lr·decay·weight — the
// decay never flows through the moments). Rejects non-finite gradients,
// naming the tensor.
void optimizer_step(Parameters& params, OptimizerState& state, double lr, const AdamConfig& adam);

// ---- training loop ----

struct TrainConfig {
  double base_lr = 3e-4;
  long long warmup = 200;
  long long total = 20000;
  AdamConfig adam;  // adam.weight_decay is the run's decay
  std::uint64_t seed = 42;
  std::vector<TaskSpec> tasks;     // exactly one marked as the epoch reference
  long long validate_every = 0;    // 0 disables between-step scoring
  long long checkpoint_every = 0;  // 0 keeps only the final checkpoint

  void validate() const;
};

struct ValPoint {
  long long step = 0;
  std::string task;
  double bleu = 0.0;
  double exact_match = 0.0;
};

struct TrainSummary {
  Checkpoint final_checkpoint;
  std::string final_checkpoint_path;
  std::string log_path;      // CSV: step,epoch,task,loss,lr (one row per task per step)
  std::string val_log_path;  // CSV: step,task,bleu,exact_match (when validation is on)
  std::vector<ValPoint> val_points;
  long long steps_run = 0;
  bool aborted = false;  // non-finite loss stopped the run; last good params saved
};

// Runs the composite-batch loop: every step draws one unrolled example per
// task, sums their losses, and applies a single optimizer step at
// lr_at(step). Step numbering starts at start_step + 1 so resumed runs
// continue their log. Fully deterministic for a fixed (config, seed, initial
// parameters).
TrainSummary train(const ModelConfig& model_config, const TrainConfig& train_config,
                   const Vocabulary& vocab, Parameters initial, long long start_step,
                   const std::string& out_dir);

// ---- ablations ----

struct AblationConfig {
  std::string mode;  // "init" or "multitask"
  ModelConfig model;
  TrainConfig schedule;
  std::string out_dir;
  std::string text_checkpoint;    // init mode: donor for the text side
  std::string visual_checkpoint;  // init mode: donor for the visual side
};

struct AblationResult {
  std::vector<std::string> variants;  // subdirectory per variant
  std::string summary_path;           // CSV: step,variant,task,bleu,exact_match
};

// init mode: trains the reference task three ways — random init, visual-donor
// init, and text+visual hybrid init — on identical data and seed, so the runs
// differ only in their initialization manifests. multitask mode: trains the
// reference task alone versus the full registry. Each variant's run artifacts
// land in out_dir/<variant>/ and the merged curves in the summary CSV, rows
// aligned on a shared step grid.
// Records where each tensor's initial values came from (text/visual/random),
// one JSON object per run directory.
void write_init_manifest(const std::string& path, const TransferManifest& manifest);

AblationResult run_ablation(const AblationConfig& config, const Vocabulary& vocab);

}  // namespace bgen
