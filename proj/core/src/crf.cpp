#include "wsid/crf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wsid {

namespace {

constexpr int kExactLimit = 96 * 96;

bool integer_valued_255(const RgbImage& img) {
  for (const Plane* p : {&img.r, &img.g, &img.b})
    for (double v : p->v) {
      if (v < 0.0 || v > 255.0) return false;
      if (v != std::floor(v)) return false;
    }
  return true;
}

void softmax2(const Plane& u0, const Plane& u1, Plane& q0, Plane& q1) {
  for (size_t i = 0; i < u0.v.size(); ++i) {
    const double a = -u0.v[i], b = -u1.v[i];
    const double m = std::max(a, b);
    const double e0 = std::exp(a - m), e1 = std::exp(b - m);
    q0.v[i] = e0 / (e0 + e1);
    q1.v[i] = e1 / (e0 + e1);
  }
}

}  // namespace

UnaryField unary_from_prob(const Plane& prob) {
  UnaryField u;
  u.salient = Plane(prob.h, prob.w);
  u.background = Plane(prob.h, prob.w);
  for (size_t i = 0; i < prob.v.size(); ++i) {
    const double p = std::clamp(prob.v[i], 1e-6, 1.0 - 1e-6);
    u.salient.v[i] = -std::log(p);
    u.background.v[i] = -std::log(1.0 - p);
  }
  return u;
}

Plane mean_field(const RgbImage& image, const UnaryField& unary,
                 const CrfParams& params) {
  const int h = image.height(), w = image.width();
  if (h < 1 || w < 1) throw std::invalid_argument("mean_field: empty image");
  if (unary.salient.h != h || unary.salient.w != w ||
      unary.background.h != h || unary.background.w != w)
    throw std::invalid_argument("mean_field: unary " +
                                std::to_string(unary.salient.h) + "x" +
                                std::to_string(unary.salient.w) +
                                " does not match image " + std::to_string(h) +
                                "x" + std::to_string(w));
  if (params.iterations < 1)
    throw std::invalid_argument("mean_field: iterations must be >= 1");
  if (params.w1 < 0 || params.w2 < 0)
    throw std::invalid_argument("mean_field: kernel weights must be >= 0");
  for (const Plane* p : {&unary.salient, &unary.background})
    for (double v : p->v)
      if (!std::isfinite(v))
        throw std::invalid_argument("mean_field: non-finite unary");

  Plane q0(h, w), q1(h, w);  // q0 = salient
  softmax2(unary.salient, unary.background, q0, q1);

  if (params.w1 == 0.0 && params.w2 == 0.0)
    return q0;  // softmax of the unary is already the fixed point

  const int n = h * w;
  int ry, rx;
  if (params.truncation_radius > 0) {
    ry = rx = params.truncation_radius;
  } else if (n <= kExactLimit) {
    ry = h - 1;
    rx = w - 1;
  } else {
    ry = rx = (int)std::ceil(
        3.0 * std::max(params.sigma_alpha, params.sigma_gamma));
  }
  ry = std::min(ry, h - 1);
  rx = std::min(rx, w - 1);

  // Spatial factors by squared pixel distance.
  const int max_d2 = ry * ry + rx * rx;
  std::vector<double> app_sp(max_d2 + 1), smo_sp(max_d2 + 1);
  for (int d2 = 0; d2 <= max_d2; ++d2) {
    app_sp[d2] = std::exp(-d2 / (2.0 * params.sigma_alpha * params.sigma_alpha));
    smo_sp[d2] = std::exp(-d2 / (2.0 * params.sigma_gamma * params.sigma_gamma));
  }

  // Color factor: exact table when the image is integer-valued in [0,255]
  // (squared distances are then integers), otherwise direct exp.
  const bool use_lut = integer_valued_255(image);
  std::vector<double> col_lut;
  if (use_lut) {
    col_lut.resize(3 * 255 * 255 + 1);
    for (size_t d2 = 0; d2 < col_lut.size(); ++d2)
      col_lut[d2] = std::exp(-(double)d2 /
                             (2.0 * params.sigma_beta * params.sigma_beta));
  }
  auto color_factor = [&](int i, int j) {
    const double dr = image.r.v[i] - image.r.v[j];
    const double dg = image.g.v[i] - image.g.v[j];
    const double db = image.b.v[i] - image.b.v[j];
    const double d2 = dr * dr + dg * dg + db * db;
    return use_lut ? col_lut[(size_t)(d2 + 0.5)]
                   : std::exp(-d2 / (2.0 * params.sigma_beta *
                                     params.sigma_beta));
  };

  // Enumerate each unordered in-window pair once via forward offsets.
  auto for_pairs = [&](auto&& fn) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int i = y * w + x;
        for (int dy = 0; dy <= ry; ++dy) {
          const int yy = y + dy;
          if (yy >= h) break;
          const int x_lo = dy == 0 ? 1 : -rx;
          for (int dx = x_lo; dx <= rx; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= w) continue;
            const int j = yy * w + xx;
            const int d2 = dy * dy + dx * dx;
            const double k = params.w1 * app_sp[d2] * color_factor(i, j) +
                             params.w2 * smo_sp[d2];
            fn(i, j, k);
          }
        }
      }
  };

  // k is independent of Q, so the per-pixel total mass is fixed; the message
  // for the second label is ksum - m0.
  std::vector<double> ksum(n, 0.0);
  for_pairs([&](int i, int j, double k) {
    ksum[i] += k;
    ksum[j] += k;
  });

  std::vector<double> m0(n);
  for (int it = 0; it < params.iterations; ++it) {
    std::fill(m0.begin(), m0.end(), 0.0);
    for_pairs([&](int i, int j, double k) {
      m0[i] += k * q0.v[j];
      m0[j] += k * q0.v[i];
    });
    for (int i = 0; i < n; ++i) {
      const double m1 = ksum[i] - m0[i];
      const double e0 = unary.salient.v[i] + m1;     // Potts: pay for the other label
      const double e1 = unary.background.v[i] + m0[i];
      const double mx = std::max(-e0, -e1);
      const double z0 = std::exp(-e0 - mx), z1 = std::exp(-e1 - mx);
      q0.v[i] = z0 / (z0 + z1);
      q1.v[i] = z1 / (z0 + z1);
    }
  }
  return q0;
}

Plane cam_to_pseudo_mask(const Plane& cam, const RgbImage& image,
                         double tau_cam, const CrfParams& params) {
  if (cam.h != image.height() || cam.w != image.width())
    throw std::invalid_argument("cam_to_pseudo_mask: cam size mismatch");
  double maxv = 0.0;
  for (double v : cam.v) maxv = std::max(maxv, v);
  if (maxv <= 0.0) return Plane(cam.h, cam.w);

  Plane prob(cam.h, cam.w);
  for (size_t i = 0; i < cam.v.size(); ++i)
    prob.v[i] = std::clamp(cam.v[i] / maxv + (0.5 - tau_cam), 1e-6, 1.0 - 1e-6);

  Plane marginal = mean_field(image, unary_from_prob(prob), params);
  Plane mask(cam.h, cam.w);
  for (size_t i = 0; i < mask.v.size(); ++i)
    mask.v[i] = marginal.v[i] >= 0.5 ? 1.0 : 0.0;
  return mask;
}

}  // namespace wsid
