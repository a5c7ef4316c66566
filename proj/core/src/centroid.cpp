#include "wsid/centroid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wsid {

Tensor tensor_from_plane(const Plane& p) {
  return Tensor::from_data({1, 1, p.h, p.w}, p.v);
}

Plane plane_from_tensor(const Tensor& t, int n, int c) {
  if (t.ndim() != 4)
    throw std::invalid_argument("plane_from_tensor: expected NCHW, got " +
                                shape_str(t.shape()));
  const int H = t.dim(2), W = t.dim(3);
  Plane p(H, W);
  const long long base = ((long long)n * t.dim(1) + c) * H * W;
  std::copy(t.data().begin() + base, t.data().begin() + base + (long long)H * W,
            p.v.begin());
  return p;
}

Tensor tensor_from_rgb(const RgbImage& img, double scale) {
  const int H = img.height(), W = img.width();
  std::vector<double> d(3LL * H * W);
  for (int i = 0; i < H * W; ++i) {
    d[i] = img.r.v[i] * scale;
    d[(long long)H * W + i] = img.g.v[i] * scale;
    d[2LL * H * W + i] = img.b.v[i] * scale;
  }
  return Tensor::from_data({1, 3, H, W}, std::move(d));
}

double tau_mass_for_count(double total_mass, int count) {
  return 0.25 * total_mass / std::max(count, 1);
}

Tensor splat_votes(const Tensor& offsets, const std::vector<uint8_t>& mask) {
  if (offsets.ndim() != 4 || offsets.dim(0) != 1 || offsets.dim(1) != 2)
    throw std::invalid_argument("splat_votes: expected [1,2,H,W] offsets, got " +
                                shape_str(offsets.shape()));
  const int H = offsets.dim(2), W = offsets.dim(3);
  if ((int)mask.size() != H * W)
    throw std::invalid_argument("splat_votes: mask size " +
                                std::to_string(mask.size()) + " != " +
                                std::to_string(H * W));

  struct Vote {
    int pixel;         // source index
    int x0, y0;        // top-left target cell
    double fx, fy;     // bilinear fractions
    bool clamped_x, clamped_y;
  };
  std::vector<Vote> votes;
  const auto& v = offsets.data();
  std::vector<double> acc((long long)H * W, 0.0);

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int i = y * W + x;
      if (!mask[i]) continue;
      const double raw_tx = x + v[i] * (W / 2.0);
      const double raw_ty = y + v[(long long)H * W + i] * (H / 2.0);
      const double tx = std::clamp(raw_tx, 0.0, W - 1.0);
      const double ty = std::clamp(raw_ty, 0.0, H - 1.0);
      Vote vt;
      vt.pixel = i;
      vt.x0 = std::min((int)std::floor(tx), W - 1);
      vt.y0 = std::min((int)std::floor(ty), H - 1);
      vt.fx = tx - vt.x0;
      vt.fy = ty - vt.y0;
      vt.clamped_x = raw_tx != tx;
      vt.clamped_y = raw_ty != ty;
      votes.push_back(vt);
      const int x1 = std::min(vt.x0 + 1, W - 1);
      const int y1 = std::min(vt.y0 + 1, H - 1);
      acc[(long long)vt.y0 * W + vt.x0] += (1 - vt.fy) * (1 - vt.fx);
      acc[(long long)vt.y0 * W + x1] += (1 - vt.fy) * vt.fx;
      acc[(long long)y1 * W + vt.x0] += vt.fy * (1 - vt.fx);
      acc[(long long)y1 * W + x1] += vt.fy * vt.fx;
    }

  Tensor off = offsets;
  return Tensor::make_op(
      {1, 1, H, W}, std::move(acc), {offsets},
      [off, votes = std::move(votes), H, W](detail::TensorNode& self) {
        off.node()->ensure_grad();
        auto& g = off.node()->grad;
        for (const auto& vt : votes) {
          const int x1 = std::min(vt.x0 + 1, W - 1);
          const int y1 = std::min(vt.y0 + 1, H - 1);
          const double g00 = self.grad[(long long)vt.y0 * W + vt.x0];
          const double g01 = self.grad[(long long)vt.y0 * W + x1];
          const double g10 = self.grad[(long long)y1 * W + vt.x0];
          const double g11 = self.grad[(long long)y1 * W + x1];
          if (!vt.clamped_x) {
            const double dtx = -(1 - vt.fy) * g00 + (1 - vt.fy) * g01 -
                               vt.fy * g10 + vt.fy * g11;
            g[vt.pixel] += dtx * (W / 2.0);
          }
          if (!vt.clamped_y) {
            const double dty = -(1 - vt.fx) * g00 - vt.fx * g01 +
                               (1 - vt.fx) * g10 + vt.fx * g11;
            g[(long long)H * W + vt.pixel] += dty * (H / 2.0);
          }
        }
      });
}

VoteAccumulator accumulate_votes(const Tensor& offsets, const Plane& saliency,
                                 double tau_s) {
  if (offsets.dim(2) != saliency.h || offsets.dim(3) != saliency.w)
    throw std::invalid_argument("accumulate_votes: saliency size mismatch");
  std::vector<uint8_t> mask(saliency.size());
  double total = 0.0;
  for (size_t i = 0; i < mask.size(); ++i) {
    mask[i] = saliency.v[i] >= tau_s ? 1 : 0;
    total += mask[i];
  }
  VoteAccumulator acc;
  acc.plane = plane_from_tensor(splat_votes(offsets.detach(), mask));
  acc.total_mass = total;
  return acc;
}

Plane smooth_votes(const Plane& votes, double sigma) {
  return gaussian_blur(votes, sigma, BlurBorder::kZero, false);
}

Tensor smooth_votes(const Tensor& votes, double sigma) {
  const auto k = gaussian_kernel_1d(sigma, false);
  const int r = (int)k.size() / 2;
  const int len = (int)k.size();
  std::vector<double> kv(len), kh(len);
  std::copy(k.begin(), k.end(), kv.begin());
  std::copy(k.begin(), k.end(), kh.begin());
  Tensor wv = Tensor::from_data({1, 1, len, 1}, std::move(kv));
  Tensor wh = Tensor::from_data({1, 1, 1, len}, std::move(kh));
  Tensor zero_b = Tensor::zeros({1});
  return conv2d(conv2d(votes, wv, zero_b, 1, r, 0), wh, zero_b, 1, 0, r);
}

CentroidSet extract_centroids(const VoteAccumulator& acc,
                              const CentroidParams& params) {
  const Plane smoothed = smooth_votes(acc.plane, params.sigma_vote);
  const auto maxima = local_maxima(smoothed, params.nms_radius);

  double tau = params.tau_mass;
  if (tau <= 0) {
    const double floor_mass = std::max(1.0, 0.05 * acc.total_mass);
    int t_hat = 0;
    for (size_t i = 0; i < maxima.size(); ++i)
      if (maxima[i] && smoothed.v[i] >= floor_mass) ++t_hat;
    tau = tau_mass_for_count(acc.total_mass, t_hat);
  }

  CentroidSet set;
  for (int y = 0; y < smoothed.h; ++y)
    for (int x = 0; x < smoothed.w; ++x) {
      const size_t i = (size_t)y * smoothed.w + x;
      if (!maxima[i]) continue;
      const double m = smoothed.v[i];
      if (m <= 0.0 || m < tau) continue;
      set.items.push_back({(double)x, (double)y, m});
    }
  std::stable_sort(set.items.begin(), set.items.end(),
                   [](const Centroid& a, const Centroid& b) {
                     return a.mass > b.mass;
                   });
  return set;
}

Tensor soft_count(const Tensor& votes, const CentroidParams& params,
                  const std::vector<uint8_t>* frozen_max_mask) {
  if (params.tau_mass <= 0)
    throw std::invalid_argument("soft_count: tau_mass must be > 0");
  const double tau = params.tau_mass;
  const double T = params.soft_t > 0 ? params.soft_t : tau / 5.0;

  Tensor smoothed = smooth_votes(votes, params.sigma_vote);
  std::vector<uint8_t> mask_storage;
  const std::vector<uint8_t>* mask = frozen_max_mask;
  if (!mask) {
    Plane sp = plane_from_tensor(smoothed);
    mask_storage = local_maxima(sp, params.nms_radius);
    mask = &mask_storage;
  }
  std::vector<double> md(mask->begin(), mask->end());
  Tensor mask_t =
      Tensor::from_data({1, 1, smoothed.dim(2), smoothed.dim(3)}, std::move(md));
  return sum(mul(mask_t, sigmoid(scale(add_scalar(smoothed, -tau), 1.0 / T))));
}

}  // namespace wsid
