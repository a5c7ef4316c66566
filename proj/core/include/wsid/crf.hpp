#pragma once

// Fully-connected two-label (salient / background) pairwise CRF with
// synchronous mean-field updates. Appearance kernel
// w1 * exp(-|p_i-p_j|^2 / (2 sa^2) - |I_i-I_j|^2 / (2 sb^2)) and smoothness
// kernel w2 * exp(-|p_i-p_j|^2 / (2 sg^2)), Potts compatibility. Message
// passing is exact (all pairs) up to 96x96 and window-truncated at radius
// 3 * max(sa, sg) above; the radius can be forced for testing.

#include "wsid/plane.hpp"

namespace wsid {

struct CrfParams {
  double w1 = 4.0;
  double w2 = 3.0;
  double sigma_alpha = 49.0;
  double sigma_beta = 5.0;
  double sigma_gamma = 3.0;
  int iterations = 5;
  // -1: auto (exact up to 96x96, else truncate); >0: force that window radius.
  int truncation_radius = -1;
};

struct UnaryField {
  Plane salient;     // negative log-probability of the salient label
  Plane background;  // negative log-probability of the background label
};

// Unary from a probability map of the salient label, clamped to
// [1e-6, 1 - 1e-6] before the logs.
UnaryField unary_from_prob(const Plane& prob);

// Image channels are expected in [0, 255] (sigma_beta is in intensity
// units). Returns the salient-label marginal after `iterations` updates.
Plane mean_field(const RgbImage& image, const UnaryField& unary,
                 const CrfParams& params);

// Max-normalizes the CAM, shifts it so `tau_cam` maps to even odds, builds
// the unary, runs mean_field, and binarizes the marginal at 0.5. An all-zero
// CAM yields an empty mask.
Plane cam_to_pseudo_mask(const Plane& cam, const RgbImage& image,
                         double tau_cam = 0.5, const CrfParams& params = {});

}  // namespace wsid
