#pragma once

#include <vector>

#include "bgen/region.hpp"
#include "bgen/tasks.hpp"
#include "bgen/tensor.hpp"

namespace bgen {

// Segment ids for the three-part input stream.
enum Segment : int { kSegSrc = 0, kSegTgt = 1, kSegVis = 2 };

// The embedding tables consulted when composing an input. These alias the
// model's parameter tensors, so gradients reach them through composition.
struct EmbeddingTables {
  Tensor token;        // [V x d_model]
  Tensor position;     // [max_positions x d_model]
  Tensor segment;      // [3 x d_model]
  Tensor visual_feat;  // [d_v x d_model]
  Tensor visual_geo;   // [4 x d_model]
};

// A composed single-stream input: one embedding row per position, exactly
// one MASK, visual positions contiguous and final.
struct ComposedInput {
  Tensor x;  // [L_seq x d_model]
  int mask_index = -1;
  std::vector<int> segments;
  std::vector<int> positions;
  std::vector<int> token_ids;  // -1 at region positions
};

// Row lookup with gradient flow into the looked-up rows.
Tensor embed_tokens(const std::vector<int>& ids, const Tensor& table);

// Rows 0..length-1 of the (learnable) positional table.
Tensor embed_positions(int length, const Tensor& table);

// Linear map of the normalized box 4-vector (x1/W, y1/H, x2/W, y2/H).
Tensor geometric_embedding(const RegionFeature& r, const Tensor& projection);

// Per region: projected feature + geometric embedding, order preserved.
Tensor embed_regions(const std::vector<RegionFeature>& regions, const Tensor& feature_projection,
                     const Tensor& geometric_projection);

// Builds the canonical layout
//   [SPEC_tgt] src... [SEP] prefix... [MASK] [SEP] regions...
// dropping the source block (with its SEP) for image-only samples and the
// visual block for text-only samples. Every position receives positional and
// segment embeddings; for visual samples the projected full-image feature is
// additionally added at every position before the region block.
ComposedInput compose_input(const Sample& sample, const std::vector<int>& prefix, int specifier,
                            const EmbeddingTables& tables);

}  // namespace bgen
