#include "bgen/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "bgen/rng.hpp"
#include "bgen/vocab.hpp"

namespace bgen {

namespace {

constexpr double kLayerNormEps = 1e-12;
constexpr double kInitStd = 0.02;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 0) throw std::invalid_argument("config: layers must be >= 0");
  if (heads < 1) throw std::invalid_argument("config: heads must be positive");
  if (d_model < 1 || d_ff < 1 || vocab_size < 1 || max_positions < 1 || d_v < 1) {
    throw std::invalid_argument("config: all widths must be positive");
  }
  if (d_model % heads != 0) {
    throw std::invalid_argument("config: d_model " + std::to_string(d_model) +
                                " not divisible by heads " + std::to_string(heads));
  }
}

// ---- Parameters ----

Tensor& Parameters::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::invalid_argument("parameters: no tensor named '" + name + "'");
  return it->second;
}

const Tensor& Parameters::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::invalid_argument("parameters: no tensor named '" + name + "'");
  return it->second;
}

void Parameters::put(const std::string& name, Tensor t) {
  if (tensors_.count(name)) throw std::invalid_argument("parameters: duplicate tensor '" + name + "'");
  tensors_.emplace(name, std::move(t));
}

std::vector<std::string> Parameters::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, t] : tensors_) out.push_back(name);
  return out;
}

void Parameters::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

std::map<std::string, std::vector<int>> parameter_shapes(const ModelConfig& config) {
  config.validate();
  const int d = config.d_model;
  std::map<std::string, std::vector<int>> shapes;
  shapes["embed.token"] = {config.vocab_size, d};
  shapes["embed.position"] = {config.max_positions, d};
  shapes["embed.segment"] = {3, d};
  shapes["visual.feat.weight"] = {config.d_v, d};
  shapes["visual.geo.weight"] = {4, d};
  for (int i = 0; i < config.layers; ++i) {
    const std::string p = "layer." + std::to_string(i) + ".";
    for (const char* block : {"q", "k", "v", "out"}) {
      shapes[p + "attn." + block + ".weight"] = {d, d};
      // A key-projection bias shifts every score in a row by the same amount
      // and cancels exactly in the row softmax, so it would be dead weight.
      if (std::string(block) != "k") shapes[p + "attn." + block + ".bias"] = {d};
    }
    shapes[p + "attn.norm.gain"] = {d};
    shapes[p + "attn.norm.bias"] = {d};
    shapes[p + "ffn.in.weight"] = {d, config.d_ff};
    shapes[p + "ffn.in.bias"] = {config.d_ff};
    shapes[p + "ffn.out.weight"] = {config.d_ff, d};
    shapes[p + "ffn.out.bias"] = {d};
    shapes[p + "ffn.norm.gain"] = {d};
    shapes[p + "ffn.norm.bias"] = {d};
  }
  shapes["head.dense.weight"] = {d, d};
  shapes["head.dense.bias"] = {d};
  shapes["head.norm.gain"] = {d};
  shapes["head.norm.bias"] = {d};
  shapes["head.out.bias"] = {config.vocab_size};
  if (config.untie_head) shapes["head.out.weight"] = {d, config.vocab_size};
  return shapes;
}

bool is_text_side(const std::string& name) {
  return name == "embed.token" || name.rfind("layer.", 0) == 0 || name.rfind("head.", 0) == 0;
}

namespace {

Tensor init_tensor(const std::string& name, const std::vector<int>& shape, std::uint64_t seed) {
  Tensor t = Tensor::zeros(shape, true);
  if (ends_with(name, ".bias")) return t;  // zeros
  if (ends_with(name, "norm.gain")) {
    for (double& v : t.values()) v = 1.0;
    return t;
  }
  std::mt19937_64 rng(mix_seed(seed, "init." + name));
  for (double& v : t.values()) v = kInitStd * gaussian(rng);
  return t;
}

}  // namespace

Parameters init_random(const ModelConfig& config) {
  Parameters params;
  for (const auto& [name, shape] : parameter_shapes(config)) {
    params.put(name, init_tensor(name, shape, config.seed));
  }
  return params;
}

Parameters init_hybrid(const ModelConfig& config, const Parameters* text_ckpt,
                       const Parameters* visual_ckpt, TransferManifest* manifest) {
  Parameters params;
  TransferManifest local;
  for (const auto& [name, shape] : parameter_shapes(config)) {
    const Parameters* source = is_text_side(name) ? text_ckpt : visual_ckpt;
    const char* source_tag = is_text_side(name) ? "text" : "visual";
    if (source && source->has(name)) {
      const Tensor& src = source->at(name);
      if (src.shape() != shape) {
        throw std::invalid_argument("init_hybrid: shape conflict for '" + name + "': checkpoint " +
                                    shape_str(src.shape()) + " vs config " + shape_str(shape));
      }
      params.put(name, Tensor::from_values(shape, src.values(), true));
      local[name] = source_tag;
    } else {
      params.put(name, init_tensor(name, shape, config.seed));
      local[name] = "random";
    }
  }
  if (manifest) *manifest = std::move(local);
  return params;
}

Model make_model(const ModelConfig& config) {
  config.validate();
  return Model{config, init_random(config)};
}

EmbeddingTables embedding_tables(const Parameters& params) {
  return EmbeddingTables{params.at("embed.token"), params.at("embed.position"),
                         params.at("embed.segment"), params.at("visual.feat.weight"),
                         params.at("visual.geo.weight")};
}

// ---- layers ----

Tensor multi_head_attention(const Model& m, int layer, const Tensor& x, std::vector<Tensor>* probs) {
  if (layer < 0 || layer >= m.config.layers) {
    throw std::invalid_argument("attention: layer " + std::to_string(layer) + " out of range");
  }
  if (x.cols() != m.config.d_model) {
    throw std::invalid_argument("attention: input width " + std::to_string(x.cols()) +
                                " does not match d_model " + std::to_string(m.config.d_model));
  }
  const Parameters& p = m.params;
  const std::string pre = "layer." + std::to_string(layer) + ".attn.";
  Tensor q = add_row(matmul(x, p.at(pre + "q.weight")), p.at(pre + "q.bias"));
  Tensor k = matmul(x, p.at(pre + "k.weight"));  // no bias: it would cancel in the row softmax
  Tensor v = add_row(matmul(x, p.at(pre + "v.weight")), p.at(pre + "v.bias"));
  const int dh = m.config.d_model / m.config.heads;
  Tensor merged;
  for (int h = 0; h < m.config.heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    // All positions attend to each other: no mask of any kind.
    Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor attn = softmax(scores, 1);
    if (probs) probs->push_back(attn);
    Tensor oh = matmul(attn, vh);
    merged = merged.defined() ? concat_cols(merged, oh) : oh;
  }
  return add_row(matmul(merged, p.at(pre + "out.weight")), p.at(pre + "out.bias"));
}

Tensor self_attention_block(const Model& m, int layer, const Tensor& x, std::vector<Tensor>* probs) {
  const std::string pre = "layer." + std::to_string(layer) + ".attn.";
  Tensor attn = multi_head_attention(m, layer, x, probs);
  return layer_norm(add(x, attn), m.params.at(pre + "norm.gain"), m.params.at(pre + "norm.bias"),
                    kLayerNormEps);
}

Tensor ffn_block(const Model& m, int layer, const Tensor& x) {
  if (x.cols() != m.config.d_model) {
    throw std::invalid_argument("ffn: input width " + std::to_string(x.cols()) +
                                " does not match d_model " + std::to_string(m.config.d_model));
  }
  const Parameters& p = m.params;
  const std::string pre = "layer." + std::to_string(layer) + ".ffn.";
  Tensor h = gelu(add_row(matmul(x, p.at(pre + "in.weight")), p.at(pre + "in.bias")));
  Tensor y = add_row(matmul(h, p.at(pre + "out.weight")), p.at(pre + "out.bias"));
  return layer_norm(add(x, y), p.at(pre + "norm.gain"), p.at(pre + "norm.bias"), kLayerNormEps);
}

Tensor encode(const Model& m, const ComposedInput& input) {
  Tensor x = input.x;
  for (int layer = 0; layer < m.config.layers; ++layer) {
    x = self_attention_block(m, layer, x);
    x = ffn_block(m, layer, x);
  }
  return x;
}

Tensor forward(const Model& m, const ComposedInput& input) {
  if (input.mask_index < 0 || input.mask_index >= input.x.rows() ||
      input.token_ids[input.mask_index] != Vocabulary::kMask) {
    throw std::invalid_argument("forward: input has no MASK at its recorded mask index");
  }
  const Parameters& p = m.params;
  Tensor state = pick_row(encode(m, input), input.mask_index);
  Tensor h = gelu(add_row(matmul(state, p.at("head.dense.weight")), p.at("head.dense.bias")));
  h = layer_norm(h, p.at("head.norm.gain"), p.at("head.norm.bias"), kLayerNormEps);
  Tensor logits = m.config.untie_head ? matmul(h, p.at("head.out.weight"))
                                      : matmul(h, transpose(p.at("embed.token")));
  return add_row(logits, p.at("head.out.bias"));
}

// ---- loss ----

MaskedExample resolve(const Sample& sample, int specifier, const UnrolledExample& ex) {
  if (ex.t < 1 || ex.t > static_cast<int>(sample.tgt.size())) {
    throw std::invalid_argument("resolve: step " + std::to_string(ex.t) + " outside target length " +
                                std::to_string(sample.tgt.size()));
  }
  if (sample.tgt[ex.t - 1] != ex.gold) {
    throw std::invalid_argument("resolve: gold token does not match the sample's target");
  }
  return MaskedExample{&sample, specifier, ex.t, ex.gold};
}

ComposedInput compose_example(const Model& m, const MaskedExample& ex) {
  std::vector<int> prefix(ex.sample->tgt.begin(), ex.sample->tgt.begin() + (ex.t - 1));
  return compose_input(*ex.sample, prefix, ex.specifier, embedding_tables(m.params));
}

Tensor mlm_loss(const Model& m, const std::vector<MaskedExample>& examples) {
  if (examples.empty()) throw std::invalid_argument("mlm_loss: empty example list");
  Tensor total;
  for (const MaskedExample& ex : examples) {
    Tensor ce = cross_entropy(forward(m, compose_example(m, ex)), ex.gold);
    total = total.defined() ? add(total, ce) : ce;
  }
  return total;
}

}  // namespace bgen
