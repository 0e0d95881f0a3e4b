#include "bgen/region.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace bgen {

void validate_region(const RegionFeature& r, int d_v) {
  if (static_cast<int>(r.feat.size()) != d_v) {
    throw std::invalid_argument("region: feature width " + std::to_string(r.feat.size()) +
                                " does not match configured " + std::to_string(d_v));
  }
  if (!(r.w > 0) || !(r.h > 0)) throw std::invalid_argument("region: non-positive image size");
  if (!(r.x1 >= 0 && r.x1 < r.x2 && r.x2 <= r.w) || !(r.y1 >= 0 && r.y1 < r.y2 && r.y2 <= r.h)) {
    throw std::invalid_argument("region: bad box [" + std::to_string(r.x1) + "," + std::to_string(r.y1) +
                                "," + std::to_string(r.x2) + "," + std::to_string(r.y2) + "] in " +
                                std::to_string(r.w) + "x" + std::to_string(r.h));
  }
  if (!(r.conf >= 0.0 && r.conf <= 1.0)) {
    throw std::invalid_argument("region: confidence " + std::to_string(r.conf) + " outside [0,1]");
  }
}

std::vector<RegionFeature> select_regions(const std::vector<RegionFeature>& regions, int k_min,
                                          int k_max, bool* under_minimum) {
  if (regions.empty()) throw std::invalid_argument("select_regions: empty region list");
  if (k_min > k_max) throw std::invalid_argument("select_regions: k_min exceeds k_max");
  std::vector<int> idx(regions.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return regions[a].conf > regions[b].conf; });
  if (static_cast<int>(idx.size()) > k_max) idx.resize(k_max);
  if (under_minimum) *under_minimum = static_cast<int>(idx.size()) < k_min;
  std::vector<RegionFeature> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(regions[i]);
  return out;
}

}  // namespace bgen
