#pragma once

#include "wsid/plane.hpp"

namespace wsid {

// A scored binary instance mask.
struct Detection {
  Plane mask;
  double score = 0.0;
};

struct LabelMap {
  int h = 0, w = 0;
  std::vector<int> v;  // 0 = background, 1..K = instances

  LabelMap() = default;
  LabelMap(int h_, int w_) : h(h_), w(w_), v((size_t)h_ * w_, 0) {}
  int& at(int y, int x) { return v[(size_t)y * w + x]; }
  int at(int y, int x) const { return v[(size_t)y * w + x]; }
};

}  // namespace wsid
