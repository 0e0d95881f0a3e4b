#include "bgen/embeddings.hpp"

#include <stdexcept>
#include <string>

#include "bgen/vocab.hpp"

namespace bgen {

Tensor embed_tokens(const std::vector<int>& ids, const Tensor& table) {
  if (ids.empty()) throw std::invalid_argument("embed_tokens: empty id list");
  return gather_rows(table, ids);
}

Tensor embed_positions(int length, const Tensor& table) {
  if (length < 1) throw std::invalid_argument("embed_positions: non-positive length");
  if (length > table.rows()) {
    throw std::invalid_argument("embed_positions: length " + std::to_string(length) +
                                " exceeds max positions " + std::to_string(table.rows()));
  }
  std::vector<int> iota(length);
  for (int i = 0; i < length; ++i) iota[i] = i;
  return gather_rows(table, iota);
}

Tensor geometric_embedding(const RegionFeature& r, const Tensor& projection) {
  if (projection.rows() != 4) {
    throw std::invalid_argument("geometric_embedding: projection must have 4 rows, got " +
                                shape_str(projection.shape()));
  }
  if (!(r.w > 0) || !(r.h > 0) || !(r.x2 > r.x1) || !(r.y2 > r.y1)) {
    throw std::invalid_argument("geometric_embedding: degenerate box");
  }
  Tensor coords = Tensor::from_values({1, 4}, {r.x1 / r.w, r.y1 / r.h, r.x2 / r.w, r.y2 / r.h});
  return matmul(coords, projection);
}

Tensor embed_regions(const std::vector<RegionFeature>& regions, const Tensor& feature_projection,
                     const Tensor& geometric_projection) {
  if (regions.empty()) throw std::invalid_argument("embed_regions: empty region list");
  const int d_v = feature_projection.rows();
  Tensor out;
  for (const RegionFeature& r : regions) {
    if (static_cast<int>(r.feat.size()) != d_v) {
      throw std::invalid_argument("embed_regions: feature width " + std::to_string(r.feat.size()) +
                                  " does not match projection rows " + std::to_string(d_v));
    }
    Tensor feat = Tensor::from_values({1, d_v}, r.feat);
    Tensor row = add(matmul(feat, feature_projection), geometric_embedding(r, geometric_projection));
    out = out.defined() ? concat_rows(out, row) : row;
  }
  return out;
}

ComposedInput compose_input(const Sample& sample, const std::vector<int>& prefix, int specifier,
                            const EmbeddingTables& tables) {
  for (int id : prefix) {
    if (id == Vocabulary::kMask || id == Vocabulary::kStop) {
      throw std::invalid_argument("compose_input: prefix may not contain MASK or STOP");
    }
  }

  ComposedInput input;
  std::vector<int>& ids = input.token_ids;
  ids.push_back(specifier);
  input.segments.push_back(kSegSrc);
  if (!sample.src.empty()) {
    for (int id : sample.src) {
      ids.push_back(id);
      input.segments.push_back(kSegSrc);
    }
    ids.push_back(Vocabulary::kSep);
    input.segments.push_back(kSegSrc);
  }
  for (int id : prefix) {
    ids.push_back(id);
    input.segments.push_back(kSegTgt);
  }
  input.mask_index = static_cast<int>(ids.size());
  ids.push_back(Vocabulary::kMask);
  input.segments.push_back(kSegTgt);
  if (sample.has_image) {
    ids.push_back(Vocabulary::kSep);
    input.segments.push_back(kSegVis);
  }

  Tensor x = embed_tokens(ids, tables.token);
  if (sample.has_image) {
    // The full-image feature is repeated (added) at every non-region position.
    Tensor full = Tensor::from_values({1, static_cast<int>(sample.full_image.feat.size())},
                                      sample.full_image.feat);
    x = add_row(x, matmul(full, tables.visual_feat));
    if (sample.regions.empty()) throw std::invalid_argument("compose_input: visual sample without regions");
    x = concat_rows(x, embed_regions(sample.regions, tables.visual_feat, tables.visual_geo));
    for (std::size_t i = 0; i < sample.regions.size(); ++i) {
      input.token_ids.push_back(-1);
      input.segments.push_back(kSegVis);
    }
  }

  const int length = static_cast<int>(input.segments.size());
  input.positions.resize(length);
  for (int i = 0; i < length; ++i) input.positions[i] = i;
  x = add(x, embed_positions(length, tables.position));
  x = add(x, gather_rows(tables.segment, input.segments));
  input.x = x;
  return input;
}

}  // namespace bgen
