#include "wsid/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace wsid {

namespace {

void check_channels(const Tensor& f, const DaWeights& w) {
  if (f.ndim() != 4)
    throw std::invalid_argument("da: expected NCHW features, got " +
                                shape_str(f.shape()));
  if (f.dim(1) != w.channels)
    throw std::invalid_argument("da: feature channels " +
                                std::to_string(f.dim(1)) +
                                " != weight channels " +
                                std::to_string(w.channels));
}

}  // namespace

DaWeights da_init(int channels, int reduction, std::mt19937_64& rng) {
  if (channels < 1 || reduction < 1 || channels % reduction != 0)
    throw std::invalid_argument("da_init: reduction " +
                                std::to_string(reduction) +
                                " does not divide channels " +
                                std::to_string(channels));
  const int hidden = channels / reduction;
  DaWeights w;
  w.channels = channels;
  w.reduction = reduction;
  w.mlp_w1 = Tensor::randn({hidden, channels}, rng,
                           std::sqrt(2.0 / channels), true);
  w.mlp_w2 = Tensor::randn({channels, hidden}, rng,
                           std::sqrt(2.0 / hidden), true);
  w.conv7_w = Tensor::randn({1, 2, 7, 7}, rng, std::sqrt(2.0 / (2 * 49)), true);
  w.conv7_b = Tensor::zeros({1}, true);
  return w;
}

DaWeights da_zeros(int channels, int reduction) {
  if (channels < 1 || reduction < 1 || channels % reduction != 0)
    throw std::invalid_argument("da_zeros: reduction does not divide channels");
  DaWeights w;
  w.channels = channels;
  w.reduction = reduction;
  w.mlp_w1 = Tensor::zeros({channels / reduction, channels}, true);
  w.mlp_w2 = Tensor::zeros({channels, channels / reduction}, true);
  w.conv7_w = Tensor::zeros({1, 2, 7, 7}, true);
  w.conv7_b = Tensor::zeros({1}, true);
  return w;
}

Tensor channel_attention(const Tensor& f, const DaWeights& w) {
  check_channels(f, w);
  const int N = f.dim(0), C = f.dim(1);
  Tensor avg = reshape(pool_spatial(f, PoolMode::kAvg), {N, C});
  Tensor max = reshape(pool_spatial(f, PoolMode::kMax), {N, C});
  Tensor pre = add(mlp2(avg, w.mlp_w1, w.mlp_w2, w.reduction),
                   mlp2(max, w.mlp_w1, w.mlp_w2, w.reduction));
  return reshape(sigmoid(pre), {N, C, 1, 1});
}

Tensor spatial_attention(const Tensor& f, const DaWeights& w) {
  check_channels(f, w);
  Tensor pooled = concat_channels(
      {pool_channel(f, PoolMode::kAvg), pool_channel(f, PoolMode::kMax)});
  return sigmoid(conv2d(pooled, w.conv7_w, w.conv7_b, 1, 3));
}

Tensor da_forward(const Tensor& f, const DaWeights& w) {
  Tensor fc = channel_attention(f, w);
  Tensor fs = spatial_attention(f, w);
  return add(mul(f, fc), mul(f, fs));
}

}  // namespace wsid
