#include "wsid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wsid {

const char* shape_class_name(ShapeClass c) {
  switch (c) {
    case ShapeClass::kDisk: return "disk";
    case ShapeClass::kSquare: return "square";
    case ShapeClass::kTriangle: return "triangle";
  }
  return "?";
}

ShapeClass shape_class_from_name(const std::string& name) {
  if (name == "disk") return ShapeClass::kDisk;
  if (name == "square") return ShapeClass::kSquare;
  if (name == "triangle") return ShapeClass::kTriangle;
  throw std::invalid_argument("unknown shape class: " + name);
}

namespace {

Plane rasterize(ShapeClass cls, double cx, double cy, double r, int h, int w) {
  Plane m(h, w);
  switch (cls) {
    case ShapeClass::kDisk:
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
            m.at(y, x) = 1.0;
      break;
    case ShapeClass::kSquare: {
      const double s = 0.9 * r;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (std::fabs(x - cx) <= s && std::fabs(y - cy) <= s) m.at(y, x) = 1.0;
      break;
    }
    case ShapeClass::kTriangle: {
      const double ax = cx, ay = cy - 1.2 * r;
      const double bx = cx - 1.1 * r, by = cy + 0.9 * r;
      const double ex = cx + 1.1 * r, ey = cy + 0.9 * r;
      auto side = [](double px, double py, double x0, double y0, double x1,
                     double y1) {
        return (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0);
      };
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double s1 = side(x, y, ax, ay, bx, by);
          const double s2 = side(x, y, bx, by, ex, ey);
          const double s3 = side(x, y, ex, ey, ax, ay);
          if ((s1 >= 0 && s2 >= 0 && s3 >= 0) || (s1 <= 0 && s2 <= 0 && s3 <= 0))
            m.at(y, x) = 1.0;
        }
      break;
    }
  }
  return m;
}

bool intersects(const Plane& a, const Plane& b) {
  for (size_t i = 0; i < a.v.size(); ++i)
    if (a.v[i] > 0.5 && b.v[i] > 0.5) return true;
  return false;
}

long long area(const Plane& m) {
  long long a = 0;
  for (double v : m.v) a += v > 0.5;
  return a;
}

// Coarse value-noise plane upsampled bilinearly (align-corners false).
Plane value_noise(int h, int w, int grid, double amp, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Plane coarse(grid, grid);
  for (auto& v : coarse.v) v = uni(rng);
  Plane out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double sy = (y + 0.5) * grid / h - 0.5;
      const double sx = (x + 0.5) * grid / w - 0.5;
      const int y0 = (int)std::floor(sy), x0 = (int)std::floor(sx);
      const double fy = sy - y0, fx = sx - x0;
      auto sample = [&](int yy, int xx) {
        return coarse.at(std::clamp(yy, 0, grid - 1), std::clamp(xx, 0, grid - 1));
      };
      out.at(y, x) = amp * ((1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                            fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1)));
    }
  return out;
}

struct ClassStyle {
  double r, g, b;
  double erosion;
};

const ClassStyle kStyles[3] = {
    {205, 65, 55, 1.0},   // disk
    {70, 185, 80, 2.0},   // square
    {65, 95, 205, 1.0},   // triangle
};

}  // namespace

SceneSample gen_scene(uint64_t seed, const SceneSpec& spec) {
  if (spec.min_instances < 1 || spec.max_instances < spec.min_instances)
    throw std::invalid_argument("gen_scene: bad instance range");
  if (spec.min_radius < 2 || spec.max_radius < spec.min_radius)
    throw std::invalid_argument("gen_scene: bad radius range");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(spec.min_instances, spec.max_instances);
  std::uniform_int_distribution<int> cls_dist(0, 2);
  std::uniform_real_distribution<double> r_dist(spec.min_radius, spec.max_radius);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  const int h = spec.height, w = spec.width;
  SceneSample s;
  s.seed = seed;
  s.height = h;
  s.width = w;

  const int want = n_dist(rng);
  Plane occupied(h, w);            // union of placed masks
  Plane occupied_margin(h, w);     // union dilated by the separation gap

  auto try_place = [&](ShapeClass cls, double radius, double cx, double cy,
                       bool need_margin) -> bool {
    if (cx - radius < 2 || cx + radius > w - 3 || cy - radius < 2 ||
        cy + radius > h - 3)
      return false;
    Plane mask = rasterize(cls, cx, cy, radius, h, w);
    if (area(mask) < 4) return false;
    if (intersects(mask, need_margin ? occupied_margin : occupied)) return false;
    s.gt_instances.push_back(mask);
    s.class_ids.push_back(cls);
    for (size_t i = 0; i < mask.v.size(); ++i)
      if (mask.v[i] > 0.5) occupied.v[i] = 1.0;
    Plane dil = dilate(mask, 3.0);
    for (size_t i = 0; i < dil.v.size(); ++i)
      if (dil.v[i] > 0.5) occupied_margin.v[i] = 1.0;
    return true;
  };

  int placed = 0;
  if (spec.allow_adjacent_same_class && want >= 2) {
    // Stressor pair: same class, similar size, masks as close as possible
    // without overlapping.
    for (int attempt = 0; attempt < 60 && placed == 0; ++attempt) {
      const ShapeClass cls = (ShapeClass)cls_dist(rng);
      const double r1 = r_dist(rng);
      const double r2 = r1 * (0.9 + 0.2 * uni(rng));
      const double cx = 2 + r1 + uni(rng) * (w - 5 - 2 * (r1 + r2 + 2) - 2 * r1);
      const double cy = h / 2.0 + (uni(rng) - 0.5) * (h - 6 - 2 * std::max(r1, r2) - 2 * std::max(r1, r2));
      if (!try_place(cls, r1, cx, cy, false)) continue;
      placed = 1;
      // Slide the partner in from the right until the masks would touch.
      const Plane& first = s.gt_instances[0];
      for (double d = r1 + r2 + 4; d >= 1.0; d -= 1.0) {
        Plane cand = rasterize(cls, cx + d, cy, r2, h, w);
        if (area(cand) < 4 || cx + d + r2 > w - 3) continue;
        if (intersects(cand, first)) break;
        Plane grown = dilate(cand, 1.5);
        if (intersects(grown, first)) {  // adjacent: gap <= 1 px
          s.gt_instances.push_back(cand);
          s.class_ids.push_back(cls);
          for (size_t i = 0; i < cand.v.size(); ++i)
            if (cand.v[i] > 0.5) occupied.v[i] = 1.0;
          Plane dil = dilate(cand, 3.0);
          for (size_t i = 0; i < dil.v.size(); ++i)
            if (dil.v[i] > 0.5) occupied_margin.v[i] = 1.0;
          placed = 2;
          break;
        }
      }
      if (placed != 2) {  // partner failed; drop the first and retry
        s.gt_instances.clear();
        s.class_ids.clear();
        occupied = Plane(h, w);
        occupied_margin = Plane(h, w);
        placed = 0;
      }
    }
  }

  for (int attempt = 0; attempt < 400 && placed < want; ++attempt) {
    const ShapeClass cls = (ShapeClass)cls_dist(rng);
    const double radius = r_dist(rng);
    const double cx = 2 + radius + uni(rng) * (w - 5 - 2 * radius);
    const double cy = 2 + radius + uni(rng) * (h - 5 - 2 * radius);
    if (try_place(cls, radius, cx, cy, true)) ++placed;
  }
  if (placed == 0)
    throw std::runtime_error("gen_scene: failed to place any instance");
  s.t_star = placed;

  // Background texture then instances, then mild pixel noise, quantized to
  // integers so the CRF color table is exact and PNG round-trips losslessly.
  const double base[3] = {125, 120, 112};
  Plane tex_r = value_noise(h, w, 8, 45.0 * spec.texture_level, rng);
  Plane tex_g = value_noise(h, w, 8, 45.0 * spec.texture_level, rng);
  Plane tex_b = value_noise(h, w, 8, 45.0 * spec.texture_level, rng);
  s.image = RgbImage(h, w);
  for (int i = 0; i < h * w; ++i) {
    s.image.r.v[i] = base[0] + tex_r.v[i];
    s.image.g.v[i] = base[1] + tex_g.v[i];
    s.image.b.v[i] = base[2] + tex_b.v[i];
  }
  std::uniform_real_distribution<double> jit(-spec.color_jitter, spec.color_jitter);
  for (size_t k = 0; k < s.gt_instances.size(); ++k) {
    const ClassStyle& st = kStyles[(int)s.class_ids[k]];
    const double jr = jit(rng), jg = jit(rng), jb = jit(rng);
    for (size_t i = 0; i < s.gt_instances[k].v.size(); ++i)
      if (s.gt_instances[k].v[i] > 0.5) {
        s.image.r.v[i] = st.r + jr;
        s.image.g.v[i] = st.g + jg;
        s.image.b.v[i] = st.b + jb;
      }
  }
  std::uniform_real_distribution<double> pix(-spec.pixel_noise, spec.pixel_noise);
  for (Plane* p : {&s.image.r, &s.image.g, &s.image.b})
    for (auto& v : p->v)
      v = std::clamp(std::round(v + pix(rng)), 0.0, 255.0);
  return s;
}

Plane simulate_cam(const SceneSample& sample, const CamParams& params) {
  const int h = sample.height, w = sample.width;
  Plane cam(h, w);
  for (size_t k = 0; k < sample.gt_instances.size(); ++k) {
    const double er =
        kStyles[(int)sample.class_ids[k]].erosion * params.erode_scale;
    Plane m = er > 0 ? erode(sample.gt_instances[k], er) : sample.gt_instances[k];
    if (area(m) == 0) m = sample.gt_instances[k];  // keep tiny instances visible
    for (size_t i = 0; i < m.v.size(); ++i)
      if (m.v[i] > 0.5) cam.v[i] = 1.0;
  }
  if (params.blur_sigma > 0)
    cam = gaussian_blur(cam, params.blur_sigma, BlurBorder::kRenormalize);
  if (params.noise > 0) {
    std::mt19937_64 rng(sample.seed ^ 0xc2b2ae3d27d4eb4fULL);
    std::uniform_real_distribution<double> uni(-params.noise, params.noise);
    for (auto& v : cam.v) v = std::max(0.0, v + uni(rng));
  }
  double maxv = 0.0;
  for (double v : cam.v) maxv = std::max(maxv, v);
  if (maxv > 0)
    for (auto& v : cam.v) v /= maxv;
  return cam;
}

PseudoMaps pseudo_supervision(const SceneSample& sample,
                              const CamParams& cam_params,
                              const CrfParams& crf_params) {
  PseudoMaps out;
  out.cam = simulate_cam(sample, cam_params);
  out.saliency = cam_to_pseudo_mask(out.cam, sample.image, 0.5, crf_params);

  int num_comp = 0;
  const auto labels = connected_components(out.saliency, num_comp, true);
  out.boundary = component_edges(out.saliency, labels);

  const int h = sample.height, w = sample.width;
  out.off_x = Plane(h, w);
  out.off_y = Plane(h, w);
  std::vector<double> cx(num_comp + 1, 0.0), cy(num_comp + 1, 0.0), cnt(num_comp + 1, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int lab = labels[(size_t)y * w + x];
      if (!lab) continue;
      cx[lab] += x;
      cy[lab] += y;
      cnt[lab] += 1;
    }
  for (int l = 1; l <= num_comp; ++l) {
    cx[l] /= cnt[l];
    cy[l] /= cnt[l];
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int lab = labels[(size_t)y * w + x];
      if (!lab) continue;
      out.off_x.at(y, x) =
          std::clamp((cx[lab] - x) / (w / 2.0), -0.999, 0.999);
      out.off_y.at(y, x) =
          std::clamp((cy[lab] - y) / (h / 2.0), -0.999, 0.999);
    }
  return out;
}

Plane gt_union(const SceneSample& sample) {
  Plane u(sample.height, sample.width);
  for (const auto& m : sample.gt_instances)
    for (size_t i = 0; i < m.v.size(); ++i)
      if (m.v[i] > 0.5) u.v[i] = 1.0;
  return u;
}

Plane gt_boundary(const SceneSample& sample) {
  const int h = sample.height, w = sample.width;
  const auto labels = labels_from_instances(sample.gt_instances, h, w);
  Plane out(h, w);
  const int dy4[] = {-1, 1, 0, 0}, dx4[] = {0, 0, -1, 1};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int lab = labels[(size_t)y * w + x];
      for (int k = 0; k < 4; ++k) {
        const int yy = y + dy4[k], xx = x + dx4[k];
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        const int nl = labels[(size_t)yy * w + xx];
        // Background pixels next to an instance; instance pixels next to a
        // different instance (touching interfaces).
        if ((lab == 0 && nl != 0) || (lab != 0 && nl != 0 && nl != lab)) {
          out.at(y, x) = 1.0;
          break;
        }
      }
    }
  return out;
}

void gt_offsets(const SceneSample& sample, Plane& off_x, Plane& off_y) {
  const int h = sample.height, w = sample.width;
  off_x = Plane(h, w);
  off_y = Plane(h, w);
  for (const auto& m : sample.gt_instances) {
    double cx = 0, cy = 0, cnt = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (m.at(y, x) > 0.5) {
          cx += x;
          cy += y;
          cnt += 1;
        }
    if (cnt == 0) continue;
    cx /= cnt;
    cy /= cnt;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (m.at(y, x) > 0.5) {
          off_x.at(y, x) = std::clamp((cx - x) / (w / 2.0), -0.999, 0.999);
          off_y.at(y, x) = std::clamp((cy - y) / (h / 2.0), -0.999, 0.999);
        }
  }
}

Tensor offsets_tensor(const Plane& off_x, const Plane& off_y) {
  if (off_x.h != off_y.h || off_x.w != off_y.w)
    throw std::invalid_argument("offsets_tensor: plane size mismatch");
  std::vector<double> d(2LL * off_x.h * off_x.w);
  std::copy(off_x.v.begin(), off_x.v.end(), d.begin());
  std::copy(off_y.v.begin(), off_y.v.end(), d.begin() + (long long)off_x.h * off_x.w);
  return Tensor::from_data({1, 2, off_x.h, off_x.w}, std::move(d));
}

std::vector<int> labels_from_instances(const std::vector<Plane>& instances,
                                       int h, int w) {
  std::vector<int> labels((size_t)h * w, 0);
  for (size_t k = 0; k < instances.size(); ++k)
    for (size_t i = 0; i < instances[k].v.size(); ++i)
      if (instances[k].v[i] > 0.5) labels[i] = (int)k + 1;
  return labels;
}

}  // namespace wsid
