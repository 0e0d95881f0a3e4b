#pragma once

#include <vector>

namespace bgen {

// One detected region: pooled feature activations plus its bounding box in
// pixels within a W x H image. The full-image feature travels in the same
// form with bbox = [0,0,W,H].
struct RegionFeature {
  std::vector<double> feat;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double w = 0, h = 0;
  double conf = 1.0;

  bool is_full_image() const { return x1 == 0 && y1 == 0 && x2 == w && y2 == h; }
};

// Enforces 0 <= x1 < x2 <= W, 0 <= y1 < y2 <= H, feature width = d_v,
// confidence in [0,1]. Throws std::invalid_argument.
void validate_region(const RegionFeature& r, int d_v);

// Sort by confidence descending (stable, ties keep original order), truncate
// to k_max. Fewer than k_min available keeps all and sets *under_minimum.
std::vector<RegionFeature> select_regions(const std::vector<RegionFeature>& regions, int k_min,
                                          int k_max, bool* under_minimum = nullptr);

}  // namespace bgen
