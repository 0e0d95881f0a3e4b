#include "bgen/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "bgen/inference.hpp"
#include "bgen/rng.hpp"

namespace bgen {

using nlohmann::ordered_json;

namespace fs = std::filesystem;

// ---- learning-rate schedule ----

double lr_at(long long step, double base, long long warmup, long long total) {
  if (base <= 0) throw std::invalid_argument("lr_at: base learning rate must be positive");
  if (!(0 < warmup && warmup < total)) {
    throw std::invalid_argument("lr_at: need 0 < warmup < total, got warmup " +
                                std::to_string(warmup) + " total " + std::to_string(total));
  }
  if (step < 0 || step > total) {
    throw std::invalid_argument("lr_at: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(total) + "]");
  }
  if (step <= warmup) {
    return base * static_cast<double>(step) / static_cast<double>(warmup);
  }
  return base * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

// ---- optimizer ----

void optimizer_step(Parameters& params, OptimizerState& state, double lr, const AdamConfig& adam) {
  // Validate every gradient before touching any weight, so a rejected step
  // leaves the parameters untouched.
  for (const std::string& name : params.names()) {
    for (double g : params.at(name).grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("optimizer_step: non-finite gradient in " + name);
      }
    }
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));

  for (const std::string& name : params.names()) {
    Tensor& t = params.at(name);
    std::vector<double>& values = t.values();
    const std::vector<double>& grad = t.grad();
    std::vector<double>& m = state.first_moment[name];
    std::vector<double>& v = state.second_moment[name];
    if (m.empty()) m.assign(values.size(), 0.0);
    if (v.empty()) v.assign(values.size(), 0.0);
    if (m.size() != values.size() || v.size() != values.size()) {
      throw std::runtime_error("optimizer_step: moment shape drifted for " + name);
    }
    for (size_t i = 0; i < values.size(); ++i) {
      m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * grad[i];
      v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * grad[i] * grad[i];
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + adam.eps);
      values[i] -= lr * (update + adam.weight_decay * values[i]);
    }
  }
}

// ---- training loop ----

void TrainConfig::validate() const {
  if (total < 0) throw std::invalid_argument("train config: total must be >= 0");
  if (total > 0) {
    if (base_lr <= 0) throw std::invalid_argument("train config: base_lr must be positive");
    if (!(0 < warmup && warmup < total)) {
      throw std::invalid_argument("train config: need 0 < warmup < total");
    }
  }
  if (adam.weight_decay < 0) throw std::invalid_argument("train config: weight_decay must be >= 0");
  if (validate_every < 0) throw std::invalid_argument("train config: validate_every must be >= 0");
  if (checkpoint_every < 0) {
    throw std::invalid_argument("train config: checkpoint_every must be >= 0");
  }
  if (tasks.empty()) throw std::invalid_argument("train config: tasks must not be empty");
  int references = 0;
  for (const TaskSpec& t : tasks) {
    if (t.name.empty()) throw std::invalid_argument("train config: task without a name");
    if (t.corpus_path.empty()) {
      throw std::invalid_argument("train config: task '" + t.name + "' has no corpus_path");
    }
    if (t.target_language.empty()) {
      throw std::invalid_argument("train config: task '" + t.name + "' has no target_language");
    }
    if (t.reference) ++references;
  }
  if (references != 1) {
    throw std::invalid_argument("train config: exactly one task must be the reference, got " +
                                std::to_string(references));
  }
}

namespace {

std::string csv_row(long long step, long long epoch, const std::string& task, double loss,
                    double lr) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%lld,%lld,%s,%.17g,%.17g", step, epoch, task.c_str(), loss, lr);
  return buf;
}

struct LoadedTask {
  std::vector<Sample> samples;
  std::vector<RawSample> val;
  int specifier = 0;
};

}  // namespace

TrainSummary train(const ModelConfig& model_config, const TrainConfig& train_config,
                   const Vocabulary& vocab, Parameters initial, long long start_step,
                   const std::string& out_dir) {
  model_config.validate();
  train_config.validate();
  if (start_step < 0 || start_step > train_config.total) {
    throw std::invalid_argument("train: start_step " + std::to_string(start_step) +
                                " outside [0, total]");
  }

  // The starting parameters must cover the registry exactly.
  const auto expected = parameter_shapes(model_config);
  for (const auto& [name, shape] : expected) {
    if (!initial.has(name)) throw std::invalid_argument("train: initial parameters lack " + name);
    if (initial.at(name).shape() != shape) {
      throw std::invalid_argument("train: initial tensor " + name + " has the wrong shape");
    }
  }
  if (initial.size() != expected.size()) {
    for (const std::string& name : initial.names()) {
      if (!expected.count(name)) {
        throw std::invalid_argument("train: unexpected initial tensor " + name);
      }
    }
  }

  int reference_index = 0;
  std::vector<LoadedTask> loaded(train_config.tasks.size());
  std::vector<std::vector<UnrolledExample>> pools;
  for (size_t i = 0; i < train_config.tasks.size(); ++i) {
    const TaskSpec& task = train_config.tasks[i];
    if (task.reference) reference_index = static_cast<int>(i);
    std::vector<RawSample> raw = read_corpus(task.corpus_path);
    if (raw.empty()) {
      throw std::invalid_argument("train: task '" + task.name + "' corpus is empty: " +
                                  task.corpus_path);
    }
    for (const RawSample& r : raw) {
      loaded[i].samples.push_back(encode_sample(r, vocab, task, model_config.d_v));
    }
    pools.push_back(unroll_corpus(loaded[i].samples));
    loaded[i].specifier = vocab.specifier(task.target_language);
    if (!task.val_path.empty()) loaded[i].val = read_corpus(task.val_path);
  }

  fs::create_directories(out_dir);
  TrainSummary summary;
  summary.log_path = out_dir + "/train_log.csv";
  summary.val_log_path = out_dir + "/val_log.csv";
  summary.final_checkpoint_path = out_dir + "/ckpt_final.bgen";

  std::ofstream log(summary.log_path, std::ios::trunc);
  if (!log) throw std::runtime_error("train: cannot open " + summary.log_path);
  log << "step,epoch,task,loss,lr\n";

  std::ofstream val_log;
  const bool validating = train_config.validate_every > 0;
  if (validating) {
    val_log.open(summary.val_log_path, std::ios::trunc);
    if (!val_log) throw std::runtime_error("train: cannot open " + summary.val_log_path);
    val_log << "step,task,bleu,exact_match\n";
  }

  Model m{model_config, std::move(initial)};

  auto run_validation = [&](long long at_step) {
    if (!validating) return;
    for (size_t i = 0; i < train_config.tasks.size(); ++i) {
      if (loaded[i].val.empty()) continue;
      EvalReport r = evaluate_corpus(m, vocab, train_config.tasks[i], loaded[i].val);
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%lld,%s,%.17g,%.17g", at_step,
                    train_config.tasks[i].name.c_str(), r.bleu, r.exact_match);
      val_log << buf << "\n";
      summary.val_points.push_back({at_step, train_config.tasks[i].name, r.bleu, r.exact_match});
    }
    val_log.flush();
  };

  Scheduler scheduler(pools, reference_index, train_config.seed);
  OptimizerState opt;
  long long last_completed = start_step;

  run_validation(start_step);  // starting-point scores anchor every curve

  for (long long step = start_step + 1; step <= train_config.total; ++step) {
    const long long epoch = scheduler.epoch();
    const std::vector<Scheduler::Pick> picks = scheduler.next();

    std::vector<Tensor> per_task(train_config.tasks.size());
    Tensor total_loss;
    for (const Scheduler::Pick& pick : picks) {
      const Sample& s = loaded[pick.task].samples[pick.example.sample_index];
      MaskedExample ex = resolve(s, loaded[pick.task].specifier, pick.example);
      Tensor loss = mlm_loss(m, {ex});
      per_task[pick.task] = loss;
      total_loss = total_loss.defined() ? add(total_loss, loss) : loss;
    }

    if (!std::isfinite(total_loss.item())) {
      summary.aborted = true;  // parameters still hold the last good step
      break;
    }

    const double lr = lr_at(step, train_config.base_lr, train_config.warmup, train_config.total);
    m.params.zero_grad();
    backward(total_loss);
    optimizer_step(m.params, opt, lr, train_config.adam);
    last_completed = step;

    for (size_t i = 0; i < per_task.size(); ++i) {
      log << csv_row(step, epoch, train_config.tasks[i].name, per_task[i].item(), lr) << "\n";
    }

    if (validating && step % train_config.validate_every == 0) run_validation(step);
    if (train_config.checkpoint_every > 0 && step % train_config.checkpoint_every == 0 &&
        step < train_config.total) {
      Checkpoint periodic{model_config, m.params, train_config.tasks, step};
      save_checkpoint(periodic, out_dir + "/ckpt_" + std::to_string(step) + ".bgen");
    }
  }
  log.flush();

  if (validating && !summary.aborted && last_completed > start_step &&
      last_completed % train_config.validate_every != 0) {
    run_validation(last_completed);  // close each curve at the final step
  }

  summary.steps_run = last_completed - start_step;
  summary.final_checkpoint = Checkpoint{model_config, m.params, train_config.tasks, last_completed};
  save_checkpoint(summary.final_checkpoint, summary.final_checkpoint_path);
  return summary;
}

// ---- ablations ----

void write_init_manifest(const std::string& path, const TransferManifest& manifest) {
  ordered_json j = ordered_json::object();
  for (const auto& [name, source] : manifest) j[name] = source;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_init_manifest: cannot open " + path);
  out << j.dump(2) << "\n";
}

namespace {

TransferManifest all_random_manifest(const ModelConfig& config) {
  TransferManifest manifest;
  for (const auto& [name, shape] : parameter_shapes(config)) manifest[name] = "random";
  return manifest;
}

}  // namespace

AblationResult run_ablation(const AblationConfig& config, const Vocabulary& vocab) {
  if (config.mode != "init" && config.mode != "multitask") {
    throw std::invalid_argument("run_ablation: mode must be 'init' or 'multitask', got '" +
                                config.mode + "'");
  }
  config.model.validate();
  config.schedule.validate();
  if (config.schedule.validate_every <= 0) {
    throw std::invalid_argument("run_ablation: validate_every must be positive to draw curves");
  }

  const TaskSpec* reference = nullptr;
  for (const TaskSpec& t : config.schedule.tasks) {
    if (t.reference) reference = &t;
  }
  if (reference->val_path.empty()) {
    throw std::invalid_argument("run_ablation: reference task '" + reference->name +
                                "' has no val_path");
  }

  TrainConfig single = config.schedule;
  single.tasks = {*reference};

  struct Variant {
    std::string name;
    TrainConfig schedule;
    Parameters initial;
    TransferManifest manifest;
  };
  std::vector<Variant> variants;

  if (config.mode == "init") {
    if (config.text_checkpoint.empty() || config.visual_checkpoint.empty()) {
      throw std::invalid_argument(
          "run_ablation: init mode needs text_checkpoint and visual_checkpoint");
    }
    Checkpoint text = load_checkpoint(config.text_checkpoint);
    Checkpoint visual = load_checkpoint(config.visual_checkpoint);
    TransferManifest visual_manifest, hybrid_manifest;
    Parameters random_init = init_random(config.model);
    Parameters visual_init = init_hybrid(config.model, nullptr, &visual.params, &visual_manifest);
    Parameters hybrid_init =
        init_hybrid(config.model, &text.params, &visual.params, &hybrid_manifest);
    variants.push_back({"random", single, std::move(random_init), all_random_manifest(config.model)});
    variants.push_back({"visual", single, std::move(visual_init), std::move(visual_manifest)});
    variants.push_back({"hybrid", single, std::move(hybrid_init), std::move(hybrid_manifest)});
  } else {
    // Same seed on both sides: identical starting parameters, different data mix.
    variants.push_back(
        {"single", single, init_random(config.model), all_random_manifest(config.model)});
    variants.push_back({"multitask", config.schedule, init_random(config.model),
                        all_random_manifest(config.model)});
  }

  fs::create_directories(config.out_dir);
  AblationResult result;
  result.summary_path = config.out_dir + "/summary.csv";
  std::ofstream summary(result.summary_path, std::ios::trunc);
  if (!summary) throw std::runtime_error("run_ablation: cannot open " + result.summary_path);
  summary << "step,variant,task,bleu,exact_match\n";

  for (Variant& variant : variants) {
    const std::string run_dir = config.out_dir + "/" + variant.name;
    fs::create_directories(run_dir);
    write_init_manifest(run_dir + "/init_manifest.json", variant.manifest);
    TrainSummary run =
        train(config.model, variant.schedule, vocab, std::move(variant.initial), 0, run_dir);
    if (run.aborted) {
      throw NumericalError("run_ablation: variant '" + variant.name +
                           "' aborted on non-finite loss; curves would not be comparable");
    }
    for (const ValPoint& p : run.val_points) {
      char buf[192];
      std::snprintf(buf, sizeof(buf), "%lld,%s,%s,%.17g,%.17g", p.step, variant.name.c_str(),
                    p.task.c_str(), p.bleu, p.exact_match);
      summary << buf << "\n";
    }
    result.variants.push_back(variant.name);
  }
  summary.flush();
  return result;
}

}  // namespace bgen
