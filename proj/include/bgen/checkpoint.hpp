#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "bgen/tasks.hpp"
#include "bgen/transformer.hpp"

namespace bgen {

// ---- checkpoint files ----
//
// Layout: the magic line "BGEN1", one line of JSON metadata (model config,
// training-task registry, step counter, sorted tensor manifest), then the raw
// tensor payload as little-endian 64-bit floats in manifest order.

inline constexpr const char* kCheckpointMagic = "BGEN1";

struct Checkpoint {
  ModelConfig config;
  Parameters params;
  std::vector<TaskSpec> tasks;  // directions the run trained on (corpus paths are not stored)
  long long step = 0;           // steps completed when saved; resume continues from here
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// JSON codecs shared by the checkpoint header and the run-config files, so
// the two formats can never drift apart on field names.
nlohmann::ordered_json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json task_to_json(const TaskSpec& t);
TaskSpec task_from_json(const nlohmann::ordered_json& j);

}  // namespace bgen
