#include "wsid/canny.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace wsid {

Plane canny(const Plane& gray, const CannyParams& params) {
  if (gray.empty()) throw std::invalid_argument("canny: empty image");
  if (!(params.sigma > 0)) throw std::invalid_argument("canny: sigma must be > 0");
  if (!(params.low > 0 && params.low < params.high && params.high <= 1.0))
    throw std::invalid_argument("canny: need 0 < low < high <= 1");

  Plane smooth = gaussian_blur(gray, params.sigma, BlurBorder::kRenormalize);
  Plane gx, gy;
  sobel(smooth, gx, gy);

  Plane mag(gray.h, gray.w);
  double max_mag = 0.0;
  for (size_t i = 0; i < mag.v.size(); ++i) {
    mag.v[i] = std::hypot(gx.v[i], gy.v[i]);
    max_mag = std::max(max_mag, mag.v[i]);
  }
  if (max_mag == 0.0) return Plane(gray.h, gray.w);  // flat image

  const double lo = params.low * max_mag;
  const double hi = params.high * max_mag;

  // 0: strong, 1: weak, 2: suppressed
  std::vector<uint8_t> cls(mag.v.size(), 2);
  auto mag_at = [&](int y, int x) {
    return mag.in_bounds(y, x) ? mag.at(y, x) : 0.0;
  };
  for (int y = 0; y < mag.h; ++y)
    for (int x = 0; x < mag.w; ++x) {
      const double m = mag.at(y, x);
      if (m < lo) continue;
      // Quantize the gradient direction to one of four axes and compare
      // against the two neighbors along it (> on one side, >= on the other
      // keeps single-pixel ridges on symmetric profiles).
      const double ang = std::atan2(gy.at(y, x), gx.at(y, x));
      double deg = ang * 180.0 / M_PI;
      if (deg < 0) deg += 180.0;
      double n1, n2;
      if (deg < 22.5 || deg >= 157.5) {  // horizontal gradient, E-W neighbors
        n1 = mag_at(y, x - 1);
        n2 = mag_at(y, x + 1);
      } else if (deg < 67.5) {  // diagonal: NW-SE axis of the gradient
        n1 = mag_at(y - 1, x - 1);
        n2 = mag_at(y + 1, x + 1);
      } else if (deg < 112.5) {  // vertical gradient, N-S neighbors
        n1 = mag_at(y - 1, x);
        n2 = mag_at(y + 1, x);
      } else {  // NE-SW axis
        n1 = mag_at(y - 1, x + 1);
        n2 = mag_at(y + 1, x - 1);
      }
      if (m > n1 && m >= n2) cls[(size_t)y * mag.w + x] = m >= hi ? 0 : 1;
    }

  // Hysteresis: flood from strong pixels through weak ones, 8-connected.
  Plane out(gray.h, gray.w);
  std::deque<int> queue;
  for (int i = 0; i < (int)cls.size(); ++i)
    if (cls[i] == 0) {
      out.v[i] = 1.0;
      queue.push_back(i);
    }
  const int dy8[] = {-1, -1, -1, 0, 0, 1, 1, 1};
  const int dx8[] = {-1, 0, 1, -1, 1, -1, 0, 1};
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    const int cy = cur / gray.w, cx = cur % gray.w;
    for (int k = 0; k < 8; ++k) {
      const int ny = cy + dy8[k], nx = cx + dx8[k];
      if (!out.in_bounds(ny, nx)) continue;
      const int ni = ny * gray.w + nx;
      if (cls[ni] == 1 && out.v[ni] == 0.0) {
        out.v[ni] = 1.0;
        queue.push_back(ni);
      }
    }
  }
  return out;
}

}  // namespace wsid
