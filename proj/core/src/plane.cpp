#include "wsid/plane.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace wsid {

Plane rgb_to_gray(const RgbImage& img) {
  Plane out(img.height(), img.width());
  for (size_t i = 0; i < out.v.size(); ++i)
    out.v[i] = 0.299 * img.r.v[i] + 0.587 * img.g.v[i] + 0.114 * img.b.v[i];
  return out;
}

std::vector<double> gaussian_kernel_1d(double sigma, bool normalized) {
  if (sigma <= 0) throw std::invalid_argument("gaussian_kernel_1d: sigma <= 0");
  const int r = (int)std::ceil(3.0 * sigma);
  std::vector<double> k(2 * r + 1);
  double s = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-(double)i * i / (2.0 * sigma * sigma));
    s += k[i + r];
  }
  if (normalized)
    for (auto& v : k) v /= s;
  return k;
}

Plane gaussian_blur(const Plane& p, double sigma, BlurBorder border,
                    bool normalized_kernel) {
  const auto k = gaussian_kernel_1d(sigma, normalized_kernel);
  const int r = (int)k.size() / 2;

  Plane tmp(p.h, p.w), out(p.h, p.w);
  // vertical
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= p.h) continue;
        acc += k[i + r] * p.at(yy, x);
        wsum += k[i + r];
      }
      tmp.at(y, x) = border == BlurBorder::kRenormalize && wsum > 0 ? acc / wsum : acc;
    }
  // horizontal
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= p.w) continue;
        acc += k[i + r] * tmp.at(y, xx);
        wsum += k[i + r];
      }
      out.at(y, x) = border == BlurBorder::kRenormalize && wsum > 0 ? acc / wsum : acc;
    }
  return out;
}

void sobel(const Plane& p, Plane& gx, Plane& gy) {
  gx = Plane(p.h, p.w);
  gy = Plane(p.h, p.w);
  auto sample = [&](int y, int x) {
    return p.at(std::clamp(y, 0, p.h - 1), std::clamp(x, 0, p.w - 1));
  };
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) {
      const double tl = sample(y - 1, x - 1), t = sample(y - 1, x),
                   tr = sample(y - 1, x + 1);
      const double l = sample(y, x - 1), rr = sample(y, x + 1);
      const double bl = sample(y + 1, x - 1), b = sample(y + 1, x),
                   br = sample(y + 1, x + 1);
      gx.at(y, x) = (tr + 2 * rr + br) - (tl + 2 * l + bl);
      gy.at(y, x) = (bl + 2 * b + br) - (tl + 2 * t + tr);
    }
}

std::vector<int> connected_components(const Plane& mask, int& num_components,
                                      bool eight) {
  std::vector<int> labels(mask.size(), 0);
  num_components = 0;
  std::deque<int> queue;
  const int dx4[] = {1, -1, 0, 0}, dy4[] = {0, 0, 1, -1};
  const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1}, dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int* dx = eight ? dx8 : dx4;
  const int* dy = eight ? dy8 : dy4;
  const int nn = eight ? 8 : 4;

  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) {
      const int idx = y * mask.w + x;
      if (mask.v[idx] <= 0.5 || labels[idx]) continue;
      const int lab = ++num_components;
      labels[idx] = lab;
      queue.push_back(idx);
      while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        const int cy = cur / mask.w, cx = cur % mask.w;
        for (int i = 0; i < nn; ++i) {
          const int ny = cy + dy[i], nx = cx + dx[i];
          if (!mask.in_bounds(ny, nx)) continue;
          const int nidx = ny * mask.w + nx;
          if (mask.v[nidx] > 0.5 && !labels[nidx]) {
            labels[nidx] = lab;
            queue.push_back(nidx);
          }
        }
      }
    }
  return labels;
}

namespace {

Plane morph(const Plane& mask, double radius, bool dilate_op) {
  const int r = (int)std::floor(radius);
  Plane out(mask.h, mask.w);
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) {
      bool hit = dilate_op ? false : true;
      for (int dy = -r; dy <= r && (dilate_op ? !hit : hit); ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dy * dy + dx * dx > radius * radius) continue;
          const int yy = y + dy, xx = x + dx;
          const bool on = mask.in_bounds(yy, xx) && mask.at(yy, xx) > 0.5;
          if (dilate_op && on) {
            hit = true;
            break;
          }
          if (!dilate_op && !on) {
            hit = false;
            break;
          }
        }
      out.at(y, x) = hit ? 1.0 : 0.0;
    }
  return out;
}

}  // namespace

Plane dilate(const Plane& mask, double radius) { return morph(mask, radius, true); }
Plane erode(const Plane& mask, double radius) { return morph(mask, radius, false); }

Plane component_edges(const Plane& mask, const std::vector<int>& labels) {
  Plane out(mask.h, mask.w);
  const int dx4[] = {1, -1, 0, 0}, dy4[] = {0, 0, 1, -1};
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) {
      const int lab = labels[(size_t)y * mask.w + x];
      if (!lab) continue;
      for (int i = 0; i < 4; ++i) {
        const int ny = y + dy4[i], nx = x + dx4[i];
        if (!mask.in_bounds(ny, nx)) continue;
        if (labels[(size_t)ny * mask.w + nx] != lab) {
          out.at(y, x) = 1.0;
          break;
        }
      }
    }
  return out;
}

std::vector<uint8_t> local_maxima(const Plane& p, int radius) {
  std::vector<uint8_t> out(p.size(), 0);
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) {
      const double v = p.at(y, x);
      bool peak = true;
      for (int dy = -radius; dy <= radius && peak; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dy == 0 && dx == 0) continue;
          if (dy * dy + dx * dx > radius * radius) continue;
          const int yy = y + dy, xx = x + dx;
          if (!p.in_bounds(yy, xx)) continue;
          const double q = p.at(yy, xx);
          // Equal values: the earlier row-major pixel keeps the peak.
          if (q > v || (q == v && ((long long)yy * p.w + xx) < ((long long)y * p.w + x))) {
            peak = false;
            break;
          }
        }
      out[(size_t)y * p.w + x] = peak ? 1 : 0;
    }
  return out;
}

}  // namespace wsid
