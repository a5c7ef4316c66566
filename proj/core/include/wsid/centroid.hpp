#pragma once

// Offset-field voting: salient pixels splat unit mass at the location their
// offset vector points to; peaks of the smoothed accumulator are instance
// centroids. Also the differentiable soft count used by the subitizing loss.

#include <cstdint>
#include <vector>

#include "wsid/convert.hpp"
#include "wsid/plane.hpp"
#include "wsid/tensor.hpp"

namespace wsid {

struct VoteAccumulator {
  Plane plane;
  double total_mass = 0.0;  // equals the number of voting pixels
};

struct Centroid {
  double x = 0, y = 0;
  double mass = 0;  // smoothed accumulator value at the peak
};

struct CentroidSet {
  std::vector<Centroid> items;  // sorted by mass descending
  int count() const { return (int)items.size(); }
};

struct CentroidParams {
  double sigma_vote = 2.0;
  int nms_radius = 5;
  // <= 0 selects the automatic rule: 0.25 * total_mass / max(t_hat, 1),
  // with t_hat the number of peaks above max(1, 0.05 * total_mass).
  double tau_mass = -1.0;
  // <= 0 selects tau_mass / 5.
  double soft_t = -1.0;
};

// tau_mass for a known instance count: a quarter of the mean instance mass.
double tau_mass_for_count(double total_mass, int count);

// Differentiable bilinear splat. `offsets` is [1,2,H,W] with channel 0 the
// x-offset and channel 1 the y-offset, both in units of the image
// half-extent. Pixels with mask != 0 each deposit unit mass at
// (x + v_x * W/2, y + v_y * H/2); out-of-frame targets clamp to the border
// (the clamped axis contributes no gradient). Output is [1,1,H,W].
Tensor splat_votes(const Tensor& offsets, const std::vector<uint8_t>& mask);

// Inference-side wrapper: mask = saliency >= tau_s.
VoteAccumulator accumulate_votes(const Tensor& offsets, const Plane& saliency,
                                 double tau_s);

// Smoothing applied before peak finding. The Gaussian taps are unnormalized
// (center 1) so a tight cluster's peak stays comparable to its mass;
// out-of-frame taps contribute zero on both the plane and the tensor path.
Plane smooth_votes(const Plane& votes, double sigma);
Tensor smooth_votes(const Tensor& votes, double sigma);

// Peaks of the smoothed accumulator within nms_radius with positive mass
// >= tau_mass, sorted by mass descending (row-major on ties).
CentroidSet extract_centroids(const VoteAccumulator& acc,
                              const CentroidParams& params = {});

// Differentiable surrogate count: sum over the local-max mask of
// sigmoid((smoothed - tau_mass) / T). The mask is recomputed from the
// smoothed values unless `frozen_max_mask` is given (finite-difference
// checks must freeze it); either way it is a constant to backprop.
// Requires params.tau_mass > 0.
Tensor soft_count(const Tensor& votes, const CentroidParams& params,
                  const std::vector<uint8_t>* frozen_max_mask = nullptr);

}  // namespace wsid
