#pragma once

// Deterministic synthetic scenes: colored shapes (classes disk / square /
// triangle with intra-class color jitter) on a textured background, with
// ground-truth instance masks, subitizing counts, and the pseudo-supervision
// pipeline (simulated CAM -> CRF mask -> component edges and offsets).

#include <cstdint>
#include <string>
#include <vector>

#include "wsid/crf.hpp"
#include "wsid/plane.hpp"
#include "wsid/tensor.hpp"

namespace wsid {

enum class ShapeClass { kDisk = 0, kSquare = 1, kTriangle = 2 };

const char* shape_class_name(ShapeClass c);
ShapeClass shape_class_from_name(const std::string& name);

struct SceneSpec {
  int height = 64, width = 64;
  int min_instances = 1, max_instances = 4;
  double min_radius = 5.0, max_radius = 9.0;
  double texture_level = 0.5;
  double color_jitter = 35.0;
  double pixel_noise = 2.0;
  // Places the first two instances as a same-class pair at most 2 px apart
  // (the merge stressor); remaining instances are placed normally.
  bool allow_adjacent_same_class = false;
};

struct SceneSample {
  uint64_t seed = 0;
  int height = 0, width = 0;
  RgbImage image;  // integer values in [0,255]
  std::vector<Plane> gt_instances;
  std::vector<ShapeClass> class_ids;
  int t_star = 0;
};

SceneSample gen_scene(uint64_t seed, const SceneSpec& spec = {});

struct CamParams {
  double blur_sigma = 1.5;
  double noise = 0.05;
  double erode_scale = 1.0;  // scales the class-dependent erosion radii
};

// Union of instance masks, per-class erosion, blur, seeded noise,
// renormalized to [0,1]. With sigma 0, no noise, and erode_scale 0 this is
// exactly the ground-truth union.
Plane simulate_cam(const SceneSample& sample, const CamParams& params = {});

struct PseudoMaps {
  Plane cam;
  Plane saliency;          // CRF-refined binary mask
  Plane boundary;          // 1-px inner edges of the mask components
  Plane off_x, off_y;      // normalized offsets to component centroids
};

// Components are 8-connected, so touching same-class instances collapse to
// one component with a single pseudo centroid.
PseudoMaps pseudo_supervision(const SceneSample& sample,
                              const CamParams& cam_params = {},
                              const CrfParams& crf_params = {});

// Ground-truth views used by the fusion-ceiling pipeline.
Plane gt_union(const SceneSample& sample);
// Background-side outlines plus interfaces between touching instances.
Plane gt_boundary(const SceneSample& sample);
void gt_offsets(const SceneSample& sample, Plane& off_x, Plane& off_y);

// [1,2,H,W] offsets tensor from two planes.
Tensor offsets_tensor(const Plane& off_x, const Plane& off_y);

// Dense 1..K label map from disjoint instance masks.
std::vector<int> labels_from_instances(const std::vector<Plane>& instances,
                                       int h, int w);

}  // namespace wsid
