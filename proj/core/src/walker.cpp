#include "wsid/walker.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

namespace wsid {

namespace {

const int dy4[] = {-1, 1, 0, 0};
const int dx4[] = {0, 0, -1, 1};

// Jacobi-preconditioned CG on the Dirichlet system restricted to unseeded
// nodes. Solved well below the 1e-8 residual contract so that weakly coupled
// regions (edge weights down to e^-beta) still reach 1e-6 solution accuracy.
void solve_dirichlet(const std::vector<double>& diag,
                     const std::vector<std::vector<PixelGraph::Edge>>& adj_u,
                     const std::vector<double>& b, std::vector<double>& x) {
  const size_t n = b.size();
  x.assign(n, 0.0);
  std::vector<double> r = b, z(n), p(n), ap(n);

  double bnorm = 0.0;
  for (double v : b) bnorm += v * v;
  bnorm = std::sqrt(bnorm);
  const double tol = 1e-10 * std::max(1.0, bnorm);

  for (size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = 0.0;
  for (size_t i = 0; i < n; ++i) rz += r[i] * z[i];

  const int max_iters = (int)(10 * n + 100);
  for (int it = 0; it < max_iters; ++it) {
    double rnorm = 0.0;
    for (double v : r) rnorm += v * v;
    if (std::sqrt(rnorm) <= tol) break;

    for (size_t i = 0; i < n; ++i) {
      double s = diag[i] * p[i];
      for (const auto& e : adj_u[i]) s -= e.w * p[e.to];
      ap[i] = s;
    }
    double pap = 0.0;
    for (size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (pap <= 0.0) break;  // numerically exhausted
    const double alpha = rz / pap;
    for (size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    for (size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    double rz_new = 0.0;
    for (size_t i = 0; i < n; ++i) rz_new += r[i] * z[i];
    const double beta = rz_new / rz;
    rz = rz_new;
    for (size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
}

}  // namespace

PixelGraph build_graph(const Plane& saliency, const Plane& boundary,
                       const CentroidSet& centroids, double tau_s, double beta,
                       const Plane* vote_plane) {
  const int h = saliency.h, w = saliency.w;
  if (boundary.h != h || boundary.w != w)
    throw std::invalid_argument("build_graph: boundary size mismatch");
  if (vote_plane && (vote_plane->h != h || vote_plane->w != w))
    throw std::invalid_argument("build_graph: vote plane size mismatch");

  PixelGraph g;
  g.h = h;
  g.w = w;
  g.node_of_pixel.assign((size_t)h * w, -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (saliency.at(y, x) >= tau_s) {
        g.node_of_pixel[(size_t)y * w + x] = (int)g.pixel_of_node.size();
        g.pixel_of_node.push_back(y * w + x);
      }
  const int n = (int)g.pixel_of_node.size();
  g.adj.assign(n, {});
  g.bg_weight.assign(n, 0.0);

  for (int ni = 0; ni < n; ++ni) {
    const int pix = g.pixel_of_node[ni];
    const int y = pix / w, x = pix % w;
    const double bi = boundary.at(y, x);
    double rim_b = -1.0;  // max boundary over adjacent non-salient pixels
    for (int k = 0; k < 4; ++k) {
      const int yy = y + dy4[k], xx = x + dx4[k];
      if (!saliency.in_bounds(yy, xx)) continue;
      const int nj = g.node_of_pixel[(size_t)yy * w + xx];
      if (nj >= 0) {
        if (nj > ni)  // add each edge once, mirror below
          continue;
        const double wgt = std::exp(-beta * std::max(bi, boundary.at(yy, xx)));
        g.adj[ni].push_back({nj, wgt});
        g.adj[nj].push_back({ni, wgt});
      } else {
        rim_b = std::max(rim_b, boundary.at(yy, xx));
      }
    }
    if (rim_b >= 0.0)
      g.bg_weight[ni] = std::exp(-beta * std::max(bi, rim_b));
  }

  // Connected components of the salient set (4-neighbor).
  std::vector<int> comp(n, -1);
  int num_comp = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = num_comp;
    std::deque<int> q{s};
    while (!q.empty()) {
      const int cur = q.front();
      q.pop_front();
      for (const auto& e : g.adj[cur])
        if (comp[e.to] < 0) {
          comp[e.to] = num_comp;
          q.push_back(e.to);
        }
    }
    ++num_comp;
  }

  // Centroid seeds; snap to the nearest unseeded salient pixel if needed.
  std::vector<uint8_t> seeded(n, 0);
  for (const auto& c : centroids.items) {
    const int cx = (int)std::lround(c.x), cy = (int)std::lround(c.y);
    int best = -1;
    double best_d = std::numeric_limits<double>::max();
    if (saliency.in_bounds(cy, cx)) {
      const int ni = g.node_of_pixel[(size_t)cy * w + cx];
      if (ni >= 0 && !seeded[ni]) best = ni;
    }
    if (best < 0) {
      for (int ni = 0; ni < n; ++ni) {
        if (seeded[ni]) continue;
        const int pix = g.pixel_of_node[ni];
        const double dy = pix / w - c.y, dx = pix % w - c.x;
        const double d = dy * dy + dx * dx;
        if (d < best_d) {
          best_d = d;
          best = ni;
        }
      }
    }
    if (best < 0) continue;  // no salient pixels left to seed
    seeded[best] = 1;
    Seed s;
    s.node = best;
    s.label = (int)g.seeds.size() + 1;
    s.mass = c.mass;
    s.x = g.pixel_of_node[best] % w;
    s.y = g.pixel_of_node[best] / w;
    g.seeds.push_back(s);
  }

  // Fallback seed for any component without a centroid seed.
  std::vector<uint8_t> comp_has_seed(num_comp, 0);
  for (const auto& s : g.seeds) comp_has_seed[comp[s.node]] = 1;
  for (int ci = 0; ci < num_comp; ++ci) {
    if (comp_has_seed[ci]) continue;
    int best = -1;
    double best_v = -1.0;
    for (int ni = 0; ni < n; ++ni) {
      if (comp[ni] != ci) continue;
      const int pix = g.pixel_of_node[ni];
      const double v = vote_plane ? vote_plane->v[pix] : saliency.v[pix];
      if (v > best_v) {
        best_v = v;
        best = ni;
      }
    }
    Seed s;
    s.node = best;
    s.label = (int)g.seeds.size() + 1;
    s.mass = vote_plane ? best_v : 1.0;
    s.x = g.pixel_of_node[best] % w;
    s.y = g.pixel_of_node[best] / w;
    g.seeds.push_back(s);
  }
  g.num_labels = (int)g.seeds.size();
  return g;
}

WalkResult random_walk_segment(const PixelGraph& graph) {
  const int n = (int)graph.pixel_of_node.size();
  const int K = graph.num_labels;

  std::vector<int> seed_label(n, 0);
  for (const auto& s : graph.seeds) seed_label[s.node] = s.label;

  // Unseeded subsystem.
  std::vector<int> uidx(n, -1);
  std::vector<int> node_of_u;
  for (int ni = 0; ni < n; ++ni)
    if (!seed_label[ni]) {
      uidx[ni] = (int)node_of_u.size();
      node_of_u.push_back(ni);
    }
  const int nu = (int)node_of_u.size();

  std::vector<double> diag(nu, 0.0);
  std::vector<std::vector<PixelGraph::Edge>> adj_u(nu);
  for (int ui = 0; ui < nu; ++ui) {
    const int ni = node_of_u[ui];
    double d = graph.bg_weight[ni];
    for (const auto& e : graph.adj[ni]) {
      d += e.w;
      if (uidx[e.to] >= 0) adj_u[ui].push_back({uidx[e.to], e.w});
    }
    if (d <= 0.0) {
      const int pix = graph.pixel_of_node[ni];
      throw std::runtime_error(
          "random_walk_segment: singular system, seedless isolated pixel (" +
          std::to_string(pix % graph.w) + "," + std::to_string(pix / graph.w) +
          ")");
    }
    diag[ui] = d;
  }

  // One Dirichlet solve per label; label 0 is the virtual background seed.
  WalkResult out;
  out.prob.assign(K + 1, Plane(graph.h, graph.w));
  std::vector<double> b(nu), x;
  for (int lab = 0; lab <= K; ++lab) {
    std::fill(b.begin(), b.end(), 0.0);
    if (lab == 0) {
      for (int ui = 0; ui < nu; ++ui) b[ui] = graph.bg_weight[node_of_u[ui]];
    } else {
      for (int ui = 0; ui < nu; ++ui) {
        const int ni = node_of_u[ui];
        for (const auto& e : graph.adj[ni])
          if (seed_label[e.to] == lab) b[ui] += e.w;
      }
    }
    solve_dirichlet(diag, adj_u, b, x);
    Plane& pr = out.prob[lab];
    for (int ui = 0; ui < nu; ++ui) {
      const int pix = graph.pixel_of_node[node_of_u[ui]];
      pr.v[pix] = std::clamp(x[ui], 0.0, 1.0);
    }
    for (const auto& s : graph.seeds)
      pr.v[graph.pixel_of_node[s.node]] = s.label == lab ? 1.0 : 0.0;
  }

  out.labels = LabelMap(graph.h, graph.w);
  for (int ni = 0; ni < n; ++ni) {
    const int pix = graph.pixel_of_node[ni];
    if (seed_label[ni]) {
      out.labels.v[pix] = seed_label[ni];
      continue;
    }
    int best_lab = 0;
    double best = out.prob[0].v[pix];
    for (int lab = 1; lab <= K; ++lab) {
      const double p = out.prob[lab].v[pix];
      // Instances win exact ties against the background; among instances the
      // lower index keeps the pixel.
      if (p > best || (p == best && best_lab == 0)) {
        best = p;
        best_lab = lab;
      }
    }
    out.labels.v[pix] = best_lab;
  }
  return out;
}

std::vector<Detection> detections_from_labels(const WalkResult& walk,
                                              const Plane& saliency,
                                              const PixelGraph& graph) {
  double max_mass = 0.0;
  for (const auto& s : graph.seeds) max_mass = std::max(max_mass, s.mass);

  std::vector<Detection> dets;
  for (const auto& s : graph.seeds) {
    Plane mask(walk.labels.h, walk.labels.w);
    double ssum = 0.0;
    long long area = 0;
    for (size_t i = 0; i < walk.labels.v.size(); ++i)
      if (walk.labels.v[i] == s.label) {
        mask.v[i] = 1.0;
        ssum += saliency.v[i];
        ++area;
      }
    if (area == 0) continue;
    Detection d;
    d.mask = std::move(mask);
    const double mass_norm = max_mass > 0 ? s.mass / max_mass : 1.0;
    d.score = (ssum / area) * mass_norm;
    dets.push_back(std::move(d));
  }
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.score > b.score;
                   });
  return dets;
}

InferResult infer_from_maps(const Plane& saliency, const Plane& boundary,
                            const Tensor& offsets, const FuseParams& params) {
  InferResult res;
  res.labels = LabelMap(saliency.h, saliency.w);

  VoteAccumulator acc = accumulate_votes(offsets, saliency, params.tau_s);
  if (acc.total_mass == 0.0) return res;  // nothing salient

  res.centroids = extract_centroids(acc, params.centroid);
  const Plane smoothed = smooth_votes(acc.plane, params.centroid.sigma_vote);
  PixelGraph graph = build_graph(saliency, boundary, res.centroids,
                                 params.tau_s, params.beta, &smoothed);
  WalkResult walk = random_walk_segment(graph);
  res.labels = walk.labels;
  res.detections = detections_from_labels(walk, saliency, graph);
  return res;
}

}  // namespace wsid
