#pragma once

// Double Attention: channel-wise and spatial-wise gates computed in
// parallel, each multiplied against the input features and summed. One
// weight set per feature scale; the boundary and centroid branches consume
// the same DaWeights instances.

#include <random>

#include "wsid/tensor.hpp"

namespace wsid {

struct DaWeights {
  Tensor mlp_w1;   // [C/reduction, C]
  Tensor mlp_w2;   // [C, C/reduction]
  Tensor conv7_w;  // [1, 2, 7, 7]
  Tensor conv7_b;  // [1]
  int channels = 0;
  int reduction = 4;
};

DaWeights da_init(int channels, int reduction, std::mt19937_64& rng);
DaWeights da_zeros(int channels, int reduction);

// F_c = sigmoid(MLP(avgpool(f)) + MLP(maxpool(f))), shape [N,C,1,1].
Tensor channel_attention(const Tensor& f, const DaWeights& w);

// F_s = sigmoid(conv7x7([avgpool_c(f); maxpool_c(f)])), shape [N,1,H,W].
Tensor spatial_attention(const Tensor& f, const DaWeights& w);

// f' = f * F_c + f * F_s. Zero weights make this the identity map.
Tensor da_forward(const Tensor& f, const DaWeights& w);

}  // namespace wsid
