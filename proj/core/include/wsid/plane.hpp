#pragma once

// Plain 2-D double planes and small raster utilities shared by the
// non-learned stages (edges, CRF, voting, synthesis). No autodiff here.

#include <cstdint>
#include <vector>

namespace wsid {

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int h_, int w_, double fill = 0.0) : h(h_), w(w_), v((size_t)h_ * w_, fill) {}

  double& at(int y, int x) { return v[(size_t)y * w + x]; }
  double at(int y, int x) const { return v[(size_t)y * w + x]; }
  bool in_bounds(int y, int x) const { return y >= 0 && y < h && x >= 0 && x < w; }
  size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
};

struct RgbImage {
  Plane r, g, b;

  RgbImage() = default;
  RgbImage(int h, int w, double fill = 0.0) : r(h, w, fill), g(h, w, fill), b(h, w, fill) {}
  int height() const { return r.h; }
  int width() const { return r.w; }
};

// Luma plane, 0.299 R + 0.587 G + 0.114 B.
Plane rgb_to_gray(const RgbImage& img);

// Odd-length 1-D Gaussian taps truncated at ceil(3 sigma). When `normalized`
// the taps sum to 1; otherwise the center tap is exactly 1 (used for vote
// smoothing, where peak height must stay comparable to cluster mass).
std::vector<double> gaussian_kernel_1d(double sigma, bool normalized);

enum class BlurBorder {
  kZero,         // out-of-frame samples contribute 0
  kRenormalize,  // divide by in-frame tap mass; preserves constants
};

// Separable Gaussian blur (vertical then horizontal pass).
Plane gaussian_blur(const Plane& p, double sigma, BlurBorder border,
                    bool normalized_kernel = true);

// 3x3 Sobel derivatives with replicated borders.
void sobel(const Plane& p, Plane& gx, Plane& gy);

// Label map of the nonzero pixels of `mask`; labels are 1..K in first-seen
// row-major order, 0 elsewhere. `eight` selects 8- vs 4-connectivity.
std::vector<int> connected_components(const Plane& mask, int& num_components,
                                      bool eight);

// Binary morphology on mask > 0.5, Euclidean disk of the given radius.
Plane dilate(const Plane& mask, double radius);
Plane erode(const Plane& mask, double radius);

// Mask pixels with at least one 4-neighbor outside their own component
// (image borders do not count as outside). 1-px inner edges.
Plane component_edges(const Plane& mask, const std::vector<int>& labels);

// Pixels that strictly dominate every other pixel within `radius` (Euclidean);
// equal values are won by the earlier pixel in row-major order.
std::vector<uint8_t> local_maxima(const Plane& p, int radius);

}  // namespace wsid
