#include "bgen/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "bgen/checkpoint.hpp"
#include "bgen/rng.hpp"

namespace bgen {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  ordered_json j = ordered_json::parse(in, nullptr, true);
  return j;
}

void merge_over(ordered_json& base, const ordered_json& overlay) {
  for (const auto& [key, value] : overlay.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object()) {
      merge_over(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t seed_of(const ordered_json& cfg) {
  return cfg.value("seed", std::uint64_t{42});
}

// Model block with defaults: absent keys keep the stock toy configuration.
ModelConfig model_from_cfg(const ordered_json& cfg, int vocab_size) {
  ModelConfig c;
  if (cfg.contains("model")) {
    const ordered_json& m = cfg.at("model");
    if (!m.is_object()) throw std::invalid_argument("'model' must be a JSON object");
    c.layers = m.value("layers", c.layers);
    c.heads = m.value("heads", c.heads);
    c.d_model = m.value("d_model", c.d_model);
    c.d_ff = m.value("d_ff", c.d_ff);
    c.max_positions = m.value("max_positions", c.max_positions);
    c.d_v = m.value("d_v", c.d_v);
    c.seed = m.value("seed", c.seed);
    c.untie_head = m.value("untie_head", c.untie_head);
    if (m.contains("vocab_size") && m.at("vocab_size").get<int>() != vocab_size) {
      throw std::invalid_argument("model.vocab_size " +
                                  std::to_string(m.at("vocab_size").get<int>()) +
                                  " does not match the vocabulary (" +
                                  std::to_string(vocab_size) + " tokens)");
    }
  }
  c.vocab_size = vocab_size;
  c.validate();
  return c;
}

TaskSpec task_from_cfg(const ordered_json& j) {
  if (!j.is_object()) throw std::invalid_argument("each task must be a JSON object");
  if (!j.contains("name")) throw std::invalid_argument("task entry is missing 'name'");
  if (!j.contains("modality")) {
    throw std::invalid_argument("task '" + j.at("name").get<std::string>() +
                                "' is missing 'modality'");
  }
  TaskSpec t;
  t.name = j.at("name").get<std::string>();
  t.modality = modality_from_name(j.at("modality").get<std::string>());
  t.source_language = j.value("source_language", std::string{});
  t.target_language = j.value("target_language", std::string{});
  t.corpus_path = j.value("corpus_path", std::string{});
  t.val_path = j.value("val_path", std::string{});
  t.reference = j.value("reference", false);
  return t;
}

std::vector<TaskSpec> tasks_from_cfg(const ordered_json& cfg) {
  if (cfg.contains("tasks") && cfg.contains("tasks_file")) {
    throw std::invalid_argument("give either 'tasks' or 'tasks_file', not both");
  }
  ordered_json arr;
  if (cfg.contains("tasks")) {
    arr = cfg.at("tasks");
  } else if (cfg.contains("tasks_file")) {
    arr = load_json_file(cfg.at("tasks_file").get<std::string>());
  } else {
    throw std::invalid_argument("config needs 'tasks' or 'tasks_file'");
  }
  if (!arr.is_array() || arr.empty()) throw std::invalid_argument("'tasks' must be a non-empty array");
  std::vector<TaskSpec> tasks;
  for (const auto& j : arr) tasks.push_back(task_from_cfg(j));
  return tasks;
}

TrainConfig schedule_from_cfg(const ordered_json& cfg) {
  TrainConfig t;
  if (cfg.contains("train")) {
    const ordered_json& j = cfg.at("train");
    if (!j.is_object()) throw std::invalid_argument("'train' must be a JSON object");
    t.base_lr = j.value("base_lr", t.base_lr);
    t.warmup = j.value("warmup", t.warmup);
    t.total = j.value("total", t.total);
    t.validate_every = j.value("validate_every", t.validate_every);
    t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
    t.adam.beta1 = j.value("beta1", t.adam.beta1);
    t.adam.beta2 = j.value("beta2", t.adam.beta2);
    t.adam.eps = j.value("eps", t.adam.eps);
    t.adam.weight_decay = j.value("weight_decay", t.adam.weight_decay);
  }
  t.seed = seed_of(cfg);
  t.tasks = tasks_from_cfg(cfg);
  return t;
}

Vocabulary vocab_from_cfg(const ordered_json& cfg) {
  if (!cfg.contains("vocab")) throw std::invalid_argument("config needs 'vocab' (vocabulary path)");
  return Vocabulary::load(cfg.at("vocab").get<std::string>());
}

std::string require_string(const ordered_json& cfg, const std::string& key) {
  if (!cfg.contains(key)) throw std::invalid_argument("config needs '" + key + "'");
  return cfg.at(key).get<std::string>();
}

// Direction (source, target) against a checkpoint's training registry.
bool direction_trained(const std::vector<TaskSpec>& registry, const std::string& src,
                       const std::string& tgt) {
  for (const TaskSpec& t : registry) {
    if (t.source_language == src && t.target_language == tgt) return true;
  }
  return false;
}

const TaskSpec& registry_task(const std::vector<TaskSpec>& registry, const std::string& name) {
  for (const TaskSpec& t : registry) {
    if (t.name == name) return t;
  }
  throw std::invalid_argument("task '" + name + "' is not in the checkpoint's training registry");
}

Model model_from_checkpoint(Checkpoint&& ckpt, const Vocabulary& vocab) {
  if (ckpt.config.vocab_size != vocab.size()) {
    throw std::invalid_argument("checkpoint expects a vocabulary of " +
                                std::to_string(ckpt.config.vocab_size) + " tokens, file has " +
                                std::to_string(vocab.size()));
  }
  return Model{ckpt.config, std::move(ckpt.params)};
}

// ---- synthdata helpers ----

AttributeGrammar grammar_from_cfg(const ordered_json& j) {
  AttributeGrammar g;
  g.d_v = j.value("d_v", g.d_v);
  g.noise = j.value("noise", g.noise);
  g.regions_per_item = j.value("regions_per_item", g.regions_per_item);
  g.img_w = j.value("img_w", g.img_w);
  g.img_h = j.value("img_h", g.img_h);
  if (!j.contains("slots")) throw std::invalid_argument("grammar needs 'slots'");
  for (const auto& sj : j.at("slots")) {
    GrammarSlot slot;
    slot.name = sj.at("name").get<std::string>();
    slot.options = sj.at("options").get<int>();
    for (const auto& [lang, words] : sj.at("words").items()) {
      slot.words[lang] = words.get<std::vector<std::string>>();
    }
    g.slots.push_back(std::move(slot));
  }
  validate_grammar(g);
  return g;
}

struct SynthTask {
  TaskSpec spec;
  std::vector<RawSample> train;
  std::vector<RawSample> val;
  std::vector<std::string> lexicon_lines;  // feeds the vocabulary even if sampling misses a word
};

SynthTask synth_one_task(const ordered_json& j, const AttributeGrammar* grammar,
                         std::uint64_t seed) {
  if (!j.contains("name")) throw std::invalid_argument("synth task is missing 'name'");
  const std::string name = j.at("name").get<std::string>();
  const std::string kind = j.value("kind", std::string{});
  const int train_lines = j.value("train_lines", 500);
  const int val_lines = j.value("val_lines", 0);
  if (train_lines <= 0) throw std::invalid_argument("task '" + name + "': train_lines must be positive");
  if (val_lines < 0) throw std::invalid_argument("task '" + name + "': val_lines must be >= 0");
  const std::uint64_t train_seed = mix_seed(seed, name + "/train");
  const std::uint64_t val_seed = mix_seed(seed, name + "/val");

  SynthTask out;
  out.spec.name = name;
  out.spec.source_language = j.value("source_language", std::string{});
  out.spec.target_language = j.value("target_language", std::string{});
  out.spec.reference = j.value("reference", false);
  if (out.spec.target_language.empty()) {
    throw std::invalid_argument("task '" + name + "' needs a target_language");
  }

  if (kind == "translation") {
    out.spec.modality = Modality::TEXT_TO_TEXT;
    if (out.spec.source_language.empty()) {
      throw std::invalid_argument("task '" + name + "' needs a source_language");
    }
    if (!j.contains("lexicon")) throw std::invalid_argument("task '" + name + "' needs 'lexicon'");
    const ordered_json& lex = j.at("lexicon");
    if (!lex.contains(out.spec.source_language) || !lex.contains(out.spec.target_language)) {
      throw std::invalid_argument("task '" + name +
                                  "': lexicon needs entries for both task languages");
    }
    CipherSpec cipher;
    cipher.source_lexicon = lex.at(out.spec.source_language).get<std::vector<std::string>>();
    cipher.target_lexicon = lex.at(out.spec.target_language).get<std::vector<std::string>>();
    cipher.reverse = j.value("reverse", false);
    const int len_min = j.value("len_min", 2);
    const int len_max = j.value("len_max", 5);
    out.train = synth_translation_corpus(cipher, train_lines, len_min, len_max, train_seed, name);
    if (val_lines > 0) {
      out.val = synth_translation_corpus(cipher, val_lines, len_min, len_max, val_seed, name);
    }
    for (const auto& w : cipher.source_lexicon) out.lexicon_lines.push_back(w);
    for (const auto& w : cipher.target_lexicon) out.lexicon_lines.push_back(w);
    return out;
  }

  if (kind == "captioning" || kind == "multimodal_translation") {
    if (grammar == nullptr) {
      throw std::invalid_argument("task '" + name + "' needs a top-level 'grammar'");
    }
    std::vector<std::string> omit;
    if (j.contains("omit_in_src")) omit = j.at("omit_in_src").get<std::vector<std::string>>();
    std::string src_language = out.spec.source_language;
    if (kind == "captioning") {
      if (!src_language.empty()) {
        throw std::invalid_argument("task '" + name + "': captioning has no source_language");
      }
      out.spec.modality = Modality::IMAGE_TO_TEXT;
    } else {
      if (src_language.empty()) {
        throw std::invalid_argument("task '" + name + "' needs a source_language");
      }
      out.spec.modality = Modality::IMAGE_TEXT_TO_TEXT;
    }
    out.train = caption_items_to_samples(*grammar, synth_captioning_corpus(*grammar, train_lines,
                                                                           train_seed),
                                         name, src_language, out.spec.target_language, omit);
    if (val_lines > 0) {
      out.val = caption_items_to_samples(*grammar, synth_captioning_corpus(*grammar, val_lines,
                                                                           val_seed),
                                         name, src_language, out.spec.target_language, omit);
    }
    for (const GrammarSlot& slot : grammar->slots) {
      for (const auto& [lang, words] : slot.words) {
        (void)lang;
        for (const auto& w : words) out.lexicon_lines.push_back(w);
      }
    }
    return out;
  }

  throw std::invalid_argument("task '" + name + "': unknown kind '" + kind +
                              "' (translation, captioning, multimodal_translation)");
}

}  // namespace

// ---- run plumbing ----

void set_config_path(ordered_json& config, const std::string& dotted_key,
                     const ordered_json& value) {
  if (dotted_key.empty()) throw std::invalid_argument("empty config key");
  ordered_json* node = &config;
  size_t start = 0;
  while (true) {
    size_t dot = dotted_key.find('.', start);
    std::string part = dotted_key.substr(start, dot - start);
    if (part.empty()) throw std::invalid_argument("bad config key '" + dotted_key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = ordered_json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

ordered_json effective_config(const RunConfig& rc) {
  ordered_json eff = ordered_json::object();
  if (!rc.config_path.empty()) {
    eff = load_json_file(rc.config_path);
    if (!eff.is_object()) {
      throw std::invalid_argument("config file " + rc.config_path + " must hold a JSON object");
    }
  }
  merge_over(eff, rc.overrides);
  eff["command"] = rc.command;
  eff["out"] = rc.out_dir;
  return eff;
}

// ---- synthdata ----

SynthReport cmd_synthdata(const ordered_json& cfg, const std::string& out_dir) {
  if (!cfg.contains("languages")) throw std::invalid_argument("synthdata config needs 'languages'");
  const auto languages = cfg.at("languages").get<std::vector<std::string>>();
  if (languages.empty()) throw std::invalid_argument("'languages' must not be empty");
  if (!cfg.contains("tasks") || !cfg.at("tasks").is_array() || cfg.at("tasks").empty()) {
    throw std::invalid_argument("synthdata config needs a non-empty 'tasks' array");
  }

  AttributeGrammar grammar;
  bool has_grammar = cfg.contains("grammar");
  if (has_grammar) grammar = grammar_from_cfg(cfg.at("grammar"));

  const std::uint64_t seed = seed_of(cfg);
  std::vector<SynthTask> synthed;
  for (const auto& j : cfg.at("tasks")) {
    synthed.push_back(synth_one_task(j, has_grammar ? &grammar : nullptr, seed));
    const TaskSpec& t = synthed.back().spec;
    for (const std::string& lang : {t.source_language, t.target_language}) {
      if (!lang.empty() && std::find(languages.begin(), languages.end(), lang) == languages.end()) {
        throw std::invalid_argument("task '" + t.name + "' uses language '" + lang +
                                    "' missing from 'languages'");
      }
    }
  }

  fs::create_directories(out_dir);
  SynthReport report;

  // Vocabulary over every lexicon plus everything actually generated.
  std::vector<std::string> vocab_lines;
  for (const SynthTask& st : synthed) {
    for (const auto& w : st.lexicon_lines) vocab_lines.push_back(w);
    for (const std::vector<RawSample>* split : {&st.train, &st.val}) {
      for (const RawSample& s : *split) {
        if (s.src) vocab_lines.push_back(*s.src);
        vocab_lines.push_back(s.tgt);
      }
    }
  }
  Vocabulary vocab = Vocabulary::build(vocab_lines, languages);
  report.vocab_path = out_dir + "/vocab.txt";
  vocab.save(report.vocab_path);

  ordered_json registry = ordered_json::array();
  std::string stats = "task,sentences,unrolled,ratio\n";
  for (SynthTask& st : synthed) {
    st.spec.corpus_path = out_dir + "/" + st.spec.name + "_train.jsonl";
    write_corpus(st.spec.corpus_path, st.train);
    report.corpus_paths.push_back(st.spec.corpus_path);
    if (!st.val.empty()) {
      st.spec.val_path = out_dir + "/" + st.spec.name + "_val.jsonl";
      write_corpus(st.spec.val_path, st.val);
      report.corpus_paths.push_back(st.spec.val_path);
    }

    ordered_json entry = task_to_json(st.spec);
    entry["corpus_path"] = st.spec.corpus_path;
    entry["val_path"] = st.spec.val_path;
    registry.push_back(entry);

    CorpusStats cs = corpus_stats(st.train);
    stats += st.spec.name + "," + std::to_string(cs.sentences) + "," +
             std::to_string(cs.unrolled) + "," + format_g17(cs.mean_target_len) + "\n";
  }

  report.tasks_path = out_dir + "/tasks.json";
  write_text(report.tasks_path, registry.dump(2) + "\n");
  report.stats_path = out_dir + "/stats.csv";
  write_text(report.stats_path, stats);
  return report;
}

// ---- train ----

TrainSummary cmd_train(const ordered_json& cfg, const std::string& out_dir) {
  Vocabulary vocab = vocab_from_cfg(cfg);
  TrainConfig schedule = schedule_from_cfg(cfg);

  if (cfg.contains("resume") && cfg.contains("init")) {
    throw std::invalid_argument("'resume' and 'init' are mutually exclusive");
  }

  ModelConfig mcfg;
  Parameters params;
  long long start_step = 0;

  if (cfg.contains("resume")) {
    Checkpoint ckpt = load_checkpoint(cfg.at("resume").get<std::string>());
    if (cfg.contains("model")) {
      ModelConfig requested = model_from_cfg(cfg, vocab.size());
      if (model_config_to_json(requested) != model_config_to_json(ckpt.config)) {
        throw std::invalid_argument("config 'model' differs from the resume checkpoint's config");
      }
    }
    if (ckpt.config.vocab_size != vocab.size()) {
      throw std::invalid_argument("resume checkpoint expects a vocabulary of " +
                                  std::to_string(ckpt.config.vocab_size) + " tokens, file has " +
                                  std::to_string(vocab.size()));
    }
    mcfg = ckpt.config;
    params = std::move(ckpt.params);
    start_step = ckpt.step;
  } else {
    mcfg = model_from_cfg(cfg, vocab.size());
    if (cfg.contains("init")) {
      const ordered_json& init = cfg.at("init");
      if (!init.is_object() || (!init.contains("text") && !init.contains("visual"))) {
        throw std::invalid_argument("'init' needs 'text' and/or 'visual' checkpoint paths");
      }
      Checkpoint text, visual;
      const Parameters* text_params = nullptr;
      const Parameters* visual_params = nullptr;
      if (init.contains("text")) {
        text = load_checkpoint(init.at("text").get<std::string>());
        text_params = &text.params;
      }
      if (init.contains("visual")) {
        visual = load_checkpoint(init.at("visual").get<std::string>());
        visual_params = &visual.params;
      }
      TransferManifest manifest;
      params = init_hybrid(mcfg, text_params, visual_params, &manifest);
      fs::create_directories(out_dir);
      write_init_manifest(out_dir + "/init_manifest.json", manifest);
    } else {
      params = init_random(mcfg);
    }
  }

  return train(mcfg, schedule, vocab, std::move(params), start_step, out_dir);
}

// ---- decode ----

std::string cmd_decode(const ordered_json& cfg, const std::string& out_dir) {
  Vocabulary vocab = vocab_from_cfg(cfg);
  Checkpoint ckpt = load_checkpoint(require_string(cfg, "checkpoint"));
  std::vector<TaskSpec> registry = ckpt.tasks;
  Model m = model_from_checkpoint(std::move(ckpt), vocab);
  const std::vector<RawSample> corpus = read_corpus(require_string(cfg, "input"));
  const bool zero_shot = cfg.value("zero_shot", false);

  TaskSpec task;
  if (cfg.contains("task")) {
    task = registry_task(registry, cfg.at("task").get<std::string>());
    if (zero_shot) {
      throw std::invalid_argument("task '" + task.name +
                                  "' was trained; zero_shot does not apply");
    }
  } else {
    task.name = "decode";
    task.modality = Modality::TEXT_TO_TEXT;
    task.source_language = require_string(cfg, "source_language");
    task.target_language = require_string(cfg, "target_language");
    const bool trained =
        direction_trained(registry, task.source_language, task.target_language);
    const std::string direction = task.source_language + "->" + task.target_language;
    if (trained && zero_shot) {
      throw std::invalid_argument("direction " + direction +
                                  " is in the training registry; drop zero_shot");
    }
    if (!trained && !zero_shot) {
      throw std::invalid_argument("direction " + direction +
                                  " is not in the training registry; pass zero_shot to decode anyway");
    }
  }

  std::vector<std::string> hyps =
      decode_corpus(m, vocab, task, corpus, cfg.value("max_len", 0));
  std::string text;
  for (const std::string& h : hyps) text += h + "\n";
  fs::create_directories(out_dir);
  const std::string path = out_dir + "/hyps.txt";
  write_text(path, text);
  return path;
}

// ---- eval ----

EvalReport cmd_eval(const ordered_json& cfg, const std::string& out_dir) {
  const bool congruence = cfg.value("congruence", false);
  const bool zero_shot = cfg.value("zero_shot", false);
  if (congruence && zero_shot) {
    throw std::invalid_argument("pick one of congruence / zero_shot");
  }

  EvalReport report;
  if (congruence) {
    Vocabulary vocab = vocab_from_cfg(cfg);
    Checkpoint ckpt = load_checkpoint(require_string(cfg, "checkpoint"));
    std::vector<TaskSpec> registry = ckpt.tasks;
    Model m = model_from_checkpoint(std::move(ckpt), vocab);
    const TaskSpec& task = registry_task(registry, require_string(cfg, "task"));
    report = congruence_eval(m, vocab, task, read_corpus(require_string(cfg, "corpus")),
                             seed_of(cfg), cfg.value("max_len", 0));
  } else if (zero_shot) {
    Vocabulary vocab = vocab_from_cfg(cfg);
    Checkpoint ckpt = load_checkpoint(require_string(cfg, "checkpoint"));
    std::vector<TaskSpec> registry = ckpt.tasks;
    Model m = model_from_checkpoint(std::move(ckpt), vocab);
    TaskSpec task;
    task.name = "zero_shot";
    task.modality = Modality::TEXT_TO_TEXT;
    task.source_language = require_string(cfg, "source_language");
    task.target_language = require_string(cfg, "target_language");
    report = zero_shot_eval(m, vocab, registry, task, read_corpus(require_string(cfg, "corpus")),
                            cfg.value("max_len", 0));
  } else {
    const std::vector<std::string> hyps = read_lines(require_string(cfg, "hyp"));
    const std::vector<std::string> refs = read_lines(require_string(cfg, "ref"));
    if (hyps.size() != refs.size()) {
      throw std::invalid_argument("hypothesis count " + std::to_string(hyps.size()) +
                                  " does not match reference count " + std::to_string(refs.size()));
    }
    int exact = 0;
    for (size_t i = 0; i < hyps.size(); ++i) {
      if (Vocabulary::split_words(hyps[i]) == Vocabulary::split_words(refs[i])) ++exact;
    }
    report.mode = "plain";
    report.direction = cfg.value("direction", std::string{});
    report.lines = static_cast<int>(hyps.size());
    report.bleu = bleu(hyps, refs);
    report.exact_match = hyps.empty() ? 0.0 : static_cast<double>(exact) / hyps.size();
  }

  fs::create_directories(out_dir);
  write_eval_report(report, out_dir + "/eval_report.json");
  return report;
}

// ---- ablate ----

AblationResult cmd_ablate(const ordered_json& cfg, const std::string& out_dir) {
  Vocabulary vocab = vocab_from_cfg(cfg);
  AblationConfig acfg;
  acfg.mode = require_string(cfg, "mode");
  acfg.schedule = schedule_from_cfg(cfg);
  acfg.model = model_from_cfg(cfg, vocab.size());
  acfg.out_dir = out_dir;
  acfg.text_checkpoint = cfg.value("text_checkpoint", std::string{});
  acfg.visual_checkpoint = cfg.value("visual_checkpoint", std::string{});
  return run_ablation(acfg, vocab);
}

// ---- dispatch ----

int run_command(const RunConfig& rc) {
  try {
    if (rc.out_dir.empty()) throw std::invalid_argument("an output directory is required");
    ordered_json eff = effective_config(rc);
    fs::create_directories(rc.out_dir);
    write_text(rc.out_dir + "/effective_config.json", eff.dump(2) + "\n");

    if (rc.command == "synthdata") {
      SynthReport r = cmd_synthdata(eff, rc.out_dir);
      std::cout << "synthesized " << r.corpus_paths.size() << " corpus files; stats: "
                << r.stats_path << "; vocab: " << r.vocab_path << "; registry: " << r.tasks_path
                << "\n";
      return 0;
    }
    if (rc.command == "train") {
      TrainSummary s = cmd_train(eff, rc.out_dir);
      if (s.aborted) {
        std::cerr << "error: training aborted on non-finite loss; last good checkpoint: "
                  << s.final_checkpoint_path << "\n";
        return 3;
      }
      std::cout << "trained " << s.steps_run << " steps; final checkpoint: "
                << s.final_checkpoint_path << "\n";
      return 0;
    }
    if (rc.command == "decode") {
      std::string path = cmd_decode(eff, rc.out_dir);
      std::cout << "hypotheses: " << path << "\n";
      return 0;
    }
    if (rc.command == "eval") {
      EvalReport r = cmd_eval(eff, rc.out_dir);
      std::cout << r.summary_line() << "\n";
      return 0;
    }
    if (rc.command == "ablate") {
      AblationResult r = cmd_ablate(eff, rc.out_dir);
      std::cout << "variants:";
      for (const std::string& v : r.variants) std::cout << " " << v;
      std::cout << "; summary: " << r.summary_path << "\n";
      return 0;
    }
    throw std::invalid_argument("unknown command '" + rc.command + "'");
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace bgen
