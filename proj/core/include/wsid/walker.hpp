#pragma once

// Seeded random-walker fusion. Salient pixels form a 4-neighbor graph with
// edge weights exp(-beta * max(B_i, B_j)); detected centroids seed instance
// labels and a virtual background seed attaches to the salient rim. Each
// label's arrival probability solves a Dirichlet problem on the graph
// Laplacian, by Jacobi-preconditioned conjugate gradient.

#include <vector>

#include "wsid/centroid.hpp"
#include "wsid/detection.hpp"
#include "wsid/plane.hpp"
#include "wsid/tensor.hpp"

namespace wsid {

struct Seed {
  int node = -1;
  int label = 0;  // 1..K
  double mass = 0.0;
  double x = 0, y = 0;
};

struct PixelGraph {
  int h = 0, w = 0;
  std::vector<int> node_of_pixel;  // -1 where not salient
  std::vector<int> pixel_of_node;
  struct Edge {
    int to;
    double w;
  };
  std::vector<std::vector<Edge>> adj;  // 4-neighbor edges, both directions
  std::vector<double> bg_weight;       // edge to the virtual background seed
  std::vector<Seed> seeds;             // centroid seeds then fallback seeds
  int num_labels = 0;                  // K including fallbacks
};

// Centroids landing on non-salient pixels snap to the nearest salient pixel.
// Components without a centroid gain a fallback seed at their vote-mass
// argmax (max saliency when no vote plane is supplied), so no component is
// left seedless. The background edge of a rim pixel is gated by the boundary
// response on either side of the crossing.
PixelGraph build_graph(const Plane& saliency, const Plane& boundary,
                       const CentroidSet& centroids, double tau_s, double beta,
                       const Plane* vote_plane = nullptr);

struct WalkResult {
  LabelMap labels;
  // prob[0] = background, prob[k] = instance k; defined on salient pixels.
  std::vector<Plane> prob;
};

// Throws if a connected component has no seed (names the first such pixel).
// Per-pixel probabilities over the K+1 labels sum to 1 within solver
// tolerance; argmax assigns labels, exact ties between instances go to the
// lower index and an instance beats the background on an exact tie.
WalkResult random_walk_segment(const PixelGraph& graph);

// score = mean saliency over the instance times its seed's vote mass
// normalized by the largest seed mass. Empty instances are dropped; output
// is sorted by score descending.
std::vector<Detection> detections_from_labels(const WalkResult& walk,
                                              const Plane& saliency,
                                              const PixelGraph& graph);

struct FuseParams {
  double tau_s = 0.5;
  double beta = 8.0;
  CentroidParams centroid;
};

struct InferResult {
  LabelMap labels;
  std::vector<Detection> detections;
  CentroidSet centroids;
};

// Full map-driven pipeline: threshold S, splat V, extract centroids, build
// the graph, walk, score. Deterministic. An empty salient set yields no
// detections.
InferResult infer_from_maps(const Plane& saliency, const Plane& boundary,
                            const Tensor& offsets,
                            const FuseParams& params = {});

}  // namespace wsid
