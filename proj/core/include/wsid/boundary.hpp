#pragma once

// Boundary Enhancement module: 1x7 and 7x1 low-level convolutions in
// sequence, three residual blocks, concatenation with Canny edges, and a
// 1x1 fuse. The Canny plane enters as a constant; no gradient reaches the
// detector.

#include <array>
#include <random>

#include "wsid/canny.hpp"
#include "wsid/tensor.hpp"

namespace wsid {

inline constexpr int kBeChannels = 8;

struct BeResBlock {
  Tensor w1, b1;  // [8,8,3,3]
  Tensor w2, b2;
};

struct BeWeights {
  Tensor c17_w, c17_b;  // [8,3,1,7], pad (0,3)
  Tensor c71_w, c71_b;  // [8,8,7,1], pad (3,0)
  std::array<BeResBlock, 3> res;
  Tensor fuse_w, fuse_b;  // [8,9,1,1]
};

BeWeights be_init(std::mt19937_64& rng);
BeWeights be_zeros();

// out = in + conv2(relu(conv1(in))); identity when the block is all zeros.
Tensor residual_block(const Tensor& x, const BeResBlock& blk);

// Grayscale conversion + Canny for one sample of an [N,3,H,W] image in [0,1].
Plane be_edge_plane(const Tensor& image, int n, const CannyParams& cp);

// f_b, shape [N,kBeChannels,H,W].
Tensor be_forward(const Tensor& image, const BeWeights& w,
                  const CannyParams& cp = {});

}  // namespace wsid
