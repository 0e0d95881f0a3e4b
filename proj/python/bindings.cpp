#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "bgen/checkpoint.hpp"
#include "bgen/cli.hpp"
#include "bgen/inference.hpp"
#include "bgen/trainer.hpp"
#include "bgen/vocab.hpp"

namespace py = pybind11;
using namespace bgen;
using nlohmann::ordered_json;

namespace {

ordered_json parse_cfg(const std::string& text) {
  try {
    return ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
}

std::string train_summary_json(const TrainSummary& s) {
  ordered_json j = {{"steps_run", s.steps_run},
                    {"aborted", s.aborted},
                    {"final_step", s.final_checkpoint.step},
                    {"final_checkpoint_path", s.final_checkpoint_path},
                    {"log_path", s.log_path},
                    {"val_log_path", s.val_log_path}};
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "bgen core: one bidirectional transformer that encodes and generates";

  // ---- primitives ----

  m.def("bleu", &bleu, py::arg("hypotheses"), py::arg("references"), py::arg("max_n") = 4,
        "Corpus BLEU (0..100) over whitespace tokens, no smoothing.");
  m.def("lr_at", &lr_at, py::arg("step"), py::arg("base"), py::arg("warmup"), py::arg("total"),
        "Linear warmup to `base` at `warmup`, then linear decay to 0 at `total`.");

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("build", &Vocabulary::build, py::arg("lines"), py::arg("languages"))
      .def_static("load", &Vocabulary::load, py::arg("path"))
      .def("save", &Vocabulary::save, py::arg("path"))
      .def("size", &Vocabulary::size)
      .def("contains", &Vocabulary::contains, py::arg("token"))
      .def("id", &Vocabulary::id, py::arg("token"))
      .def("token", &Vocabulary::token, py::arg("id"))
      .def("specifier", &Vocabulary::specifier, py::arg("language"))
      .def("languages", &Vocabulary::languages)
      .def("encode", &Vocabulary::encode, py::arg("text"))
      .def("decode", &Vocabulary::decode, py::arg("ids"));

  m.def(
      "checkpoint_info",
      [](const std::string& path) {
        Checkpoint ckpt = load_checkpoint(path);
        ordered_json j;
        j["step"] = ckpt.step;
        j["config"] = model_config_to_json(ckpt.config);
        ordered_json tasks = ordered_json::array();
        for (const TaskSpec& t : ckpt.tasks) tasks.push_back(task_to_json(t));
        j["tasks"] = tasks;
        ordered_json tensors = ordered_json::array();
        for (const std::string& name : ckpt.params.names()) tensors.push_back(name);
        j["tensors"] = tensors;
        return j.dump();
      },
      py::arg("path"), "Checkpoint metadata (step, config, task registry, tensor names) as JSON.");

  // ---- subcommand entry points (JSON config in, JSON report out) ----

  m.def(
      "synthdata_json",
      [](const std::string& cfg, const std::string& out_dir) {
        SynthReport r = cmd_synthdata(parse_cfg(cfg), out_dir);
        ordered_json j = {{"corpus_paths", r.corpus_paths},
                          {"vocab_path", r.vocab_path},
                          {"tasks_path", r.tasks_path},
                          {"stats_path", r.stats_path}};
        return j.dump();
      },
      py::arg("config"), py::arg("out"));

  m.def(
      "train_json",
      [](const std::string& cfg, const std::string& out_dir) {
        return train_summary_json(cmd_train(parse_cfg(cfg), out_dir));
      },
      py::arg("config"), py::arg("out"));

  m.def(
      "decode_json",
      [](const std::string& cfg, const std::string& out_dir) {
        ordered_json j = {{"hypotheses_path", cmd_decode(parse_cfg(cfg), out_dir)}};
        return j.dump();
      },
      py::arg("config"), py::arg("out"));

  m.def(
      "eval_json",
      [](const std::string& cfg, const std::string& out_dir) {
        return eval_report_to_json(cmd_eval(parse_cfg(cfg), out_dir));
      },
      py::arg("config"), py::arg("out"));

  m.def(
      "ablate_json",
      [](const std::string& cfg, const std::string& out_dir) {
        AblationResult r = cmd_ablate(parse_cfg(cfg), out_dir);
        ordered_json j = {{"variants", r.variants}, {"summary_path", r.summary_path}};
        return j.dump();
      },
      py::arg("config"), py::arg("out"));
}
