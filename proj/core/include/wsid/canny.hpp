#pragma once

// Canny edge detector: Gaussian blur, Sobel gradients, non-maximum
// suppression in four quantized directions, double threshold, hysteresis.

#include "wsid/plane.hpp"

namespace wsid {

struct CannyParams {
  double sigma = 1.0;
  // Thresholds are fractions of the maximum gradient magnitude.
  double low = 0.1;
  double high = 0.2;
};

// Binary edge plane (1 = edge). The blur preserves constants at borders, so
// the result is invariant under adding a constant to the image.
Plane canny(const Plane& gray, const CannyParams& params = {});

}  // namespace wsid
