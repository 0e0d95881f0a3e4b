#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bgen/cli.hpp"

using nlohmann::ordered_json;

namespace {

// --set key=value; the value is parsed as JSON when it looks like JSON,
// otherwise taken as a plain string.
void apply_set(ordered_json& overrides, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
  }
  const std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  ordered_json value;
  try {
    value = ordered_json::parse(raw);
  } catch (const ordered_json::parse_error&) {
    value = raw;
  }
  bgen::set_config_path(overrides, key, value);
}

struct FlagSpec {
  std::string flag;    // e.g. "--checkpoint"
  std::string key;     // config key it overrides, e.g. "checkpoint"
  std::string help;
  bool is_bool = false;
  bool is_int = false;
};

// Every value flag simply overrides the matching config key, so the whole
// surface reduces to one table per subcommand.
void add_flags(CLI::App* cmd, ordered_json* overrides, const std::vector<FlagSpec>& specs) {
  for (const FlagSpec& spec : specs) {
    if (spec.is_bool) {
      cmd->add_flag_callback(
          spec.flag, [overrides, key = spec.key] { (*overrides)[key] = true; }, spec.help);
    } else if (spec.is_int) {
      cmd->add_option_function<long long>(
          spec.flag, [overrides, key = spec.key](long long v) { (*overrides)[key] = v; },
          spec.help);
    } else {
      cmd->add_option_function<std::string>(
          spec.flag, [overrides, key = spec.key](const std::string& v) { (*overrides)[key] = v; },
          spec.help);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bgen: one bidirectional transformer that encodes and generates, end to end"};
  app.require_subcommand(1);

  bgen::RunConfig rc;
  std::vector<std::string> sets;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", rc.config_path, "JSON config file (flags override its values)");
    cmd->add_option("--out", rc.out_dir, "output directory (created if absent)")->required();
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { rc.overrides["seed"] = v; }, "run seed");
    cmd->add_option("--set", sets, "override any config key, e.g. --set train.total=100")
        ->take_all();
  };

  CLI::App* synth = app.add_subcommand("synthdata", "synthesize task corpora from a spec");
  add_common(synth);

  CLI::App* train = app.add_subcommand("train", "run the multi-task training loop");
  add_common(train);
  add_flags(train, &rc.overrides,
            {{"--vocab", "vocab", "vocabulary file"},
             {"--resume", "resume", "checkpoint to continue from"},
             {"--tasks-file", "tasks_file", "task registry JSON"}});

  CLI::App* decode = app.add_subcommand("decode", "greedy-decode a corpus under a checkpoint");
  add_common(decode);
  add_flags(decode, &rc.overrides,
            {{"--checkpoint", "checkpoint", "model checkpoint"},
             {"--vocab", "vocab", "vocabulary file"},
             {"--input", "input", "input corpus (jsonl)"},
             {"--task", "task", "task name from the checkpoint registry"},
             {"--source-lang", "source_language", "source language (direction decode)"},
             {"--target-lang", "target_language", "target language (direction decode)"},
             {"--zero-shot", "zero_shot", "allow a direction absent from the registry", true},
             {"--max-len", "max_len", "decode length cap (0 = default)", false, true}});

  CLI::App* eval = app.add_subcommand("eval", "score hypotheses or run a protocol");
  add_common(eval);
  add_flags(eval, &rc.overrides,
            {{"--hyp", "hyp", "hypotheses file (one per line)"},
             {"--ref", "ref", "references file (one per line)"},
             {"--direction", "direction", "direction label for the report"},
             {"--congruence", "congruence", "congruent vs shuffled-image decoding", true},
             {"--zero-shot", "zero_shot", "score an untrained direction", true},
             {"--checkpoint", "checkpoint", "model checkpoint (protocol modes)"},
             {"--vocab", "vocab", "vocabulary file (protocol modes)"},
             {"--corpus", "corpus", "eval corpus (protocol modes)"},
             {"--task", "task", "task name (congruence mode)"},
             {"--source-lang", "source_language", "source language (zero-shot mode)"},
             {"--target-lang", "target_language", "target language (zero-shot mode)"},
             {"--max-len", "max_len", "decode length cap (0 = default)", false, true}});

  CLI::App* ablate = app.add_subcommand("ablate", "initialization / multi-task ablations");
  add_common(ablate);
  add_flags(ablate, &rc.overrides,
            {{"--mode", "mode", "init or multitask"},
             {"--vocab", "vocab", "vocabulary file"},
             {"--tasks-file", "tasks_file", "task registry JSON"},
             {"--text-checkpoint", "text_checkpoint", "text-pretrained donor (init mode)"},
             {"--visual-checkpoint", "visual_checkpoint", "visual-pretrained donor (init mode)"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  rc.command = app.get_subcommands().front()->get_name();
  try {
    for (const std::string& kv : sets) apply_set(rc.overrides, kv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return bgen::run_command(rc);
}
