#include "wsid/eval.hpp"

#include <algorithm>
#include <stdexcept>

namespace wsid {

double mask_iou(const Plane& a, const Plane& b) {
  if (a.h != b.h || a.w != b.w)
    throw std::invalid_argument("mask_iou: size mismatch");
  long long inter = 0, uni = 0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    const bool pa = a.v[i] > 0.5, pb = b.v[i] > 0.5;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 0.0 : (double)inter / uni;
}

EvalResult evaluate(const std::vector<std::vector<Detection>>& dets_by_image,
                    const std::vector<std::vector<Plane>>& gts_by_image,
                    const std::vector<double>& iou_thresholds) {
  if (dets_by_image.size() != gts_by_image.size())
    throw std::invalid_argument(
        "evaluate: " + std::to_string(dets_by_image.size()) +
        " prediction images vs " + std::to_string(gts_by_image.size()) +
        " ground-truth images");

  struct Ref {
    int image;
    int det;
    double score;
  };
  std::vector<Ref> order;
  for (int im = 0; im < (int)dets_by_image.size(); ++im)
    for (int d = 0; d < (int)dets_by_image[im].size(); ++d)
      order.push_back({im, d, dets_by_image[im][d].score});
  std::stable_sort(order.begin(), order.end(),
                   [](const Ref& a, const Ref& b) { return a.score > b.score; });

  long long n_gt = 0;
  for (const auto& gts : gts_by_image) n_gt += (long long)gts.size();

  EvalResult res;
  for (double tau : iou_thresholds) {
    std::vector<std::vector<uint8_t>> matched(gts_by_image.size());
    for (size_t im = 0; im < gts_by_image.size(); ++im)
      matched[im].assign(gts_by_image[im].size(), 0);

    long long tp = 0;
    std::vector<PrPoint> curve;
    curve.reserve(order.size());
    for (size_t rank = 0; rank < order.size(); ++rank) {
      const Ref& ref = order[rank];
      const Detection& det = dets_by_image[ref.image][ref.det];
      int best_gt = -1;
      double best_iou = 0.0;
      const auto& gts = gts_by_image[ref.image];
      for (int gi = 0; gi < (int)gts.size(); ++gi) {
        if (matched[ref.image][gi]) continue;
        const double v = mask_iou(det.mask, gts[gi]);
        if (v > best_iou) {
          best_iou = v;
          best_gt = gi;
        }
      }
      if (best_gt >= 0 && best_iou >= tau) {
        matched[ref.image][best_gt] = 1;
        ++tp;
      }
      PrPoint pt;
      pt.recall = n_gt > 0 ? (double)tp / n_gt : 0.0;
      pt.precision = (double)tp / (double)(rank + 1);
      curve.push_back(pt);
    }

    // Monotone precision envelope integrated over recall.
    double ap = 0.0;
    double env = 0.0;
    for (auto it = curve.rbegin(); it != curve.rend(); ++it) {
      env = std::max(env, it->precision);
      const double r_lo = (it + 1) != curve.rend() ? (it + 1)->recall : 0.0;
      ap += (it->recall - r_lo) * env;
    }
    res.ap_per_threshold[tau] = ap;
    res.pr_curves[tau] = std::move(curve);
  }
  return res;
}

}  // namespace wsid
