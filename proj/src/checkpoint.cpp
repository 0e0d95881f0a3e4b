#include "bgen/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace bgen {

using nlohmann::ordered_json;

namespace {

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

}  // namespace

ordered_json model_config_to_json(const ModelConfig& c) {
  return ordered_json{{"layers", c.layers},
                      {"heads", c.heads},
                      {"d_model", c.d_model},
                      {"d_ff", c.d_ff},
                      {"vocab_size", c.vocab_size},
                      {"max_positions", c.max_positions},
                      {"d_v", c.d_v},
                      {"seed", c.seed},
                      {"untie_head", c.untie_head}};
}

ModelConfig model_config_from_json(const ordered_json& j) {
  ModelConfig c;
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.d_v = j.at("d_v").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.untie_head = j.at("untie_head").get<bool>();
  return c;
}

ordered_json task_to_json(const TaskSpec& t) {
  return ordered_json{{"name", t.name},
                      {"modality", modality_name(t.modality)},
                      {"source_language", t.source_language},
                      {"target_language", t.target_language},
                      {"reference", t.reference}};
}

TaskSpec task_from_json(const ordered_json& j) {
  TaskSpec t;
  t.name = j.at("name").get<std::string>();
  t.modality = modality_from_name(j.at("modality").get<std::string>());
  t.source_language = j.at("source_language").get<std::string>();
  t.target_language = j.at("target_language").get<std::string>();
  t.reference = j.at("reference").get<bool>();
  return t;
}

namespace {

void append_f64_le(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_f64_le(const std::string& data, size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[offset + i])) << (8 * i);
  }
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ckpt.config.validate();
  const auto expected = parameter_shapes(ckpt.config);

  ordered_json header;
  header["config"] = model_config_to_json(ckpt.config);
  header["step"] = ckpt.step;
  ordered_json tasks = ordered_json::array();
  for (const TaskSpec& t : ckpt.tasks) tasks.push_back(task_to_json(t));
  header["tasks"] = std::move(tasks);

  ordered_json manifest = ordered_json::array();
  for (const std::string& name : ckpt.params.names()) {  // names() is sorted
    auto it = expected.find(name);
    if (it == expected.end()) {
      throw std::runtime_error("save_checkpoint: tensor " + name + " not in the model registry");
    }
    const Tensor& t = ckpt.params.at(name);
    if (t.shape() != it->second) {
      throw std::runtime_error("save_checkpoint: tensor " + name + " has shape " +
                               shape_string(t.shape()) + ", registry expects " +
                               shape_string(it->second));
    }
    manifest.push_back(ordered_json{{"name", name}, {"shape", t.shape()}});
  }
  if (manifest.size() != expected.size()) {
    for (const auto& [name, shape] : expected) {
      if (!ckpt.params.has(name)) {
        throw std::runtime_error("save_checkpoint: tensor " + name + " missing from parameters");
      }
    }
  }
  header["tensors"] = std::move(manifest);

  std::string payload;
  for (const std::string& name : ckpt.params.names()) {
    for (double v : ckpt.params.at(name).values()) append_f64_le(payload, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path + " for writing");
  out << kCheckpointMagic << "\n" << header.dump() << "\n" << payload;
  out.flush();
  if (!out) throw std::runtime_error("save_checkpoint: write to " + path + " failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  const size_t magic_end = data.find('\n');
  if (magic_end == std::string::npos || data.substr(0, magic_end) != kCheckpointMagic) {
    throw std::runtime_error("load_checkpoint: " + path + " has bad magic (want " +
                             std::string(kCheckpointMagic) + ")");
  }
  const size_t header_end = data.find('\n', magic_end + 1);
  if (header_end == std::string::npos) {
    throw std::runtime_error("load_checkpoint: " + path + " is truncated (no metadata line)");
  }

  ordered_json header;
  try {
    header = ordered_json::parse(data.substr(magic_end + 1, header_end - magic_end - 1));
  } catch (const std::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path + " has unparsable metadata: " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.config = model_config_from_json(header.at("config"));
    ckpt.step = header.at("step").get<long long>();
    for (const auto& j : header.at("tasks")) ckpt.tasks.push_back(task_from_json(j));
  } catch (const std::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path + " has bad metadata: " + e.what());
  }
  ckpt.config.validate();

  // The manifest must cover the registry exactly, with matching shapes,
  // before any payload is read.
  auto expected = parameter_shapes(ckpt.config);
  std::vector<std::pair<std::string, std::vector<int>>> manifest;
  for (const auto& j : header.at("tensors")) {
    manifest.emplace_back(j.at("name").get<std::string>(), j.at("shape").get<std::vector<int>>());
  }
  size_t total = 0;
  std::string prev;
  for (const auto& [name, shape] : manifest) {
    if (!prev.empty() && !(prev < name)) {
      throw std::runtime_error("load_checkpoint: manifest is not sorted at " + name);
    }
    prev = name;
    auto it = expected.find(name);
    if (it == expected.end()) {
      throw std::runtime_error("load_checkpoint: unexpected tensor " + name + " in manifest");
    }
    if (shape != it->second) {
      throw std::runtime_error("load_checkpoint: tensor " + name + " has shape " +
                               shape_string(shape) + ", registry expects " +
                               shape_string(it->second));
    }
    size_t n = 1;
    for (int e : shape) n *= static_cast<size_t>(e);
    total += n;
  }
  if (manifest.size() != expected.size()) {
    for (const auto& [name, shape] : expected) {
      bool found = false;
      for (const auto& [mname, mshape] : manifest) found = found || mname == name;
      if (!found) throw std::runtime_error("load_checkpoint: manifest is missing tensor " + name);
    }
  }

  const size_t payload_start = header_end + 1;
  const size_t payload_bytes = data.size() - payload_start;
  if (payload_bytes != total * 8) {
    throw std::runtime_error("load_checkpoint: " + path + " payload holds " +
                             std::to_string(payload_bytes / 8) + " values, manifest needs " +
                             std::to_string(total));
  }

  size_t offset = payload_start;
  for (const auto& [name, shape] : manifest) {
    Tensor t = Tensor::zeros(shape, true);
    for (double& v : t.values()) {
      v = read_f64_le(data, offset);
      offset += 8;
    }
    ckpt.params.put(name, t);
  }
  return ckpt;
}

}  // namespace bgen
