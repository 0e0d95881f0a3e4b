#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bgen/embeddings.hpp"
#include "bgen/tasks.hpp"
#include "bgen/tensor.hpp"

namespace bgen {

struct ModelConfig {
  int layers = 2;
  int heads = 2;
  int d_model = 64;
  int d_ff = 256;
  int vocab_size = 64;
  int max_positions = 64;
  int d_v = 16;
  std::uint64_t seed = 42;
  bool untie_head = false;  // give the MLM head its own output matrix

  void validate() const;
};

// Named parameter tensors. Shapes are a pure function of the config; the
// map's sorted order is the canonical serialization order.
class Parameters {
 public:
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  void put(const std::string& name, Tensor t);
  std::vector<std::string> names() const;  // sorted
  std::size_t size() const { return tensors_.size(); }
  std::map<std::string, Tensor>& map() { return tensors_; }
  const std::map<std::string, Tensor>& map() const { return tensors_; }
  void zero_grad();

 private:
  std::map<std::string, Tensor> tensors_;
};

// Canonical tensor registry for a config: name -> shape.
std::map<std::string, std::vector<int>> parameter_shapes(const ModelConfig& config);

// True for tensors transferred from a text-pretrained checkpoint (token
// embeddings, transformer stack, MLM head); everything else — the visual
// projections plus positional and segment tables — is the visual side.
bool is_text_side(const std::string& name);

// Normal(0, 0.02) weights, zero biases, unit layer-norm gains; each tensor
// drawn from its own stream seeded by (config.seed, tensor name).
Parameters init_random(const ModelConfig& config);

// name -> "text" | "visual" | "random"
using TransferManifest = std::map<std::string, std::string>;

// Composes a model from two prior checkpoints: text side from text_ckpt,
// visual side from visual_ckpt. A null source (or a shape mismatch-free
// missing tensor) falls back to seeded random. Shape conflicts are errors.
Parameters init_hybrid(const ModelConfig& config, const Parameters* text_ckpt,
                       const Parameters* visual_ckpt, TransferManifest* manifest = nullptr);

struct Model {
  ModelConfig config;
  Parameters params;
};

Model make_model(const ModelConfig& config);

// The embedding-table view of the parameters (aliases, not copies).
EmbeddingTables embedding_tables(const Parameters& params);

// Pre-residual multi-head attention: scaled dot-product over all position
// pairs (bidirectional, no causal mask), heads concatenated, then the output
// projection. Per-head attention rows are appended to *probs when given.
Tensor multi_head_attention(const Model& m, int layer, const Tensor& x,
                            std::vector<Tensor>* probs = nullptr);

// Post-norm residual block: LN(x + attention(x)).
Tensor self_attention_block(const Model& m, int layer, const Tensor& x,
                            std::vector<Tensor>* probs = nullptr);

// Post-norm residual block: LN(x + W_out · gelu(W_in · x)).
Tensor ffn_block(const Model& m, int layer, const Tensor& x);

// Full stack over a composed input; returns per-position states [L_seq x d].
Tensor encode(const Model& m, const ComposedInput& input);

// Logits over the full vocabulary for the token at the MASK position.
Tensor forward(const Model& m, const ComposedInput& input);

// One masked-prediction example resolved against its sample: predict
// gold = tgt[t-1] from the sample's conditioning and the prefix tgt[0..t-2].
struct MaskedExample {
  const Sample* sample = nullptr;
  int specifier = 0;  // target-language token id
  int t = 1;          // 1-based target position
  int gold = 0;
};

MaskedExample resolve(const Sample& sample, int specifier, const UnrolledExample& ex);

ComposedInput compose_example(const Model& m, const MaskedExample& ex);

// Sum over examples of cross_entropy(forward(example), gold).
Tensor mlm_loss(const Model& m, const std::vector<MaskedExample>& examples);

}  // namespace bgen
