#pragma once

#include "wsid/plane.hpp"
#include "wsid/tensor.hpp"

namespace wsid {

// Constant [1,1,H,W] tensor from a plane.
Tensor tensor_from_plane(const Plane& p);

// One channel of an NCHW tensor as a plane.
Plane plane_from_tensor(const Tensor& t, int n = 0, int c = 0);

// Constant [1,3,H,W] tensor from an RGB image, scaled by `scale`
// (pass 1/255 to feed the network).
Tensor tensor_from_rgb(const RgbImage& img, double scale = 1.0);

}  // namespace wsid
