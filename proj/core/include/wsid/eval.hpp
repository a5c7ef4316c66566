#pragma once

// Class-agnostic instance segmentation scoring: greedy score-ordered
// matching at an IoU threshold, average precision by all-points
// interpolation (monotone precision envelope).

#include <map>
#include <vector>

#include "wsid/detection.hpp"

namespace wsid {

// |a && b| / |a || b|; 0 when the union is empty. Masks binarize at > 0.5.
double mask_iou(const Plane& a, const Plane& b);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct EvalResult {
  std::map<double, double> ap_per_threshold;
  std::map<double, std::vector<PrPoint>> pr_curves;
};

// `dets_by_image` and `gts_by_image` are parallel per-image lists; a length
// mismatch throws. Detections are sorted by score descending across the
// whole dataset (ties by image then detection index); each detection greedily
// matches the highest-IoU unmatched ground truth of its image when that IoU
// reaches the threshold.
EvalResult evaluate(const std::vector<std::vector<Detection>>& dets_by_image,
                    const std::vector<std::vector<Plane>>& gts_by_image,
                    const std::vector<double>& iou_thresholds);

}  // namespace wsid
