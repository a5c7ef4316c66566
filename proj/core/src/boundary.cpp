#include "wsid/boundary.hpp"

#include <cmath>
#include <stdexcept>

namespace wsid {

namespace {

Tensor conv_init(Shape s, std::mt19937_64& rng) {
  const long long fan_in = (long long)s[1] * s[2] * s[3];
  return Tensor::randn(s, rng, std::sqrt(2.0 / fan_in), true);
}

}  // namespace

BeWeights be_init(std::mt19937_64& rng) {
  BeWeights w;
  w.c17_w = conv_init({kBeChannels, 3, 1, 7}, rng);
  w.c17_b = Tensor::zeros({kBeChannels}, true);
  w.c71_w = conv_init({kBeChannels, kBeChannels, 7, 1}, rng);
  w.c71_b = Tensor::zeros({kBeChannels}, true);
  for (auto& blk : w.res) {
    blk.w1 = conv_init({kBeChannels, kBeChannels, 3, 3}, rng);
    blk.b1 = Tensor::zeros({kBeChannels}, true);
    blk.w2 = conv_init({kBeChannels, kBeChannels, 3, 3}, rng);
    blk.b2 = Tensor::zeros({kBeChannels}, true);
  }
  w.fuse_w = conv_init({kBeChannels, kBeChannels + 1, 1, 1}, rng);
  w.fuse_b = Tensor::zeros({kBeChannels}, true);
  return w;
}

BeWeights be_zeros() {
  BeWeights w;
  w.c17_w = Tensor::zeros({kBeChannels, 3, 1, 7}, true);
  w.c17_b = Tensor::zeros({kBeChannels}, true);
  w.c71_w = Tensor::zeros({kBeChannels, kBeChannels, 7, 1}, true);
  w.c71_b = Tensor::zeros({kBeChannels}, true);
  for (auto& blk : w.res) {
    blk.w1 = Tensor::zeros({kBeChannels, kBeChannels, 3, 3}, true);
    blk.b1 = Tensor::zeros({kBeChannels}, true);
    blk.w2 = Tensor::zeros({kBeChannels, kBeChannels, 3, 3}, true);
    blk.b2 = Tensor::zeros({kBeChannels}, true);
  }
  w.fuse_w = Tensor::zeros({kBeChannels, kBeChannels + 1, 1, 1}, true);
  w.fuse_b = Tensor::zeros({kBeChannels}, true);
  return w;
}

Tensor residual_block(const Tensor& x, const BeResBlock& blk) {
  return add(x, conv2d(relu(conv2d(x, blk.w1, blk.b1, 1, 1)), blk.w2, blk.b2, 1, 1));
}

Plane be_edge_plane(const Tensor& image, int n, const CannyParams& cp) {
  if (image.ndim() != 4 || image.dim(1) != 3)
    throw std::invalid_argument("be_edge_plane: expected [N,3,H,W] image, got " +
                                shape_str(image.shape()));
  const int H = image.dim(2), W = image.dim(3);
  const auto& d = image.data();
  const long long base = (long long)n * 3 * H * W;
  Plane gray(H, W);
  for (int i = 0; i < H * W; ++i)
    gray.v[i] = 0.299 * d[base + i] + 0.587 * d[base + (long long)H * W + i] +
                0.114 * d[base + 2LL * H * W + i];
  return canny(gray, cp);
}

Tensor be_forward(const Tensor& image, const BeWeights& w,
                  const CannyParams& cp) {
  if (image.ndim() != 4 || image.dim(1) != 3)
    throw std::invalid_argument("be_forward: expected [N,3,H,W] image, got " +
                                shape_str(image.shape()));
  const int N = image.dim(0), H = image.dim(2), W = image.dim(3);

  Tensor f = conv2d(image, w.c17_w, w.c17_b, 1, 0, 3);
  f = conv2d(f, w.c71_w, w.c71_b, 1, 3, 0);
  for (const auto& blk : w.res) f = residual_block(f, blk);

  std::vector<double> edges((long long)N * H * W);
  for (int n = 0; n < N; ++n) {
    Plane e = be_edge_plane(image, n, cp);
    std::copy(e.v.begin(), e.v.end(), edges.begin() + (long long)n * H * W);
  }
  Tensor edge_t = Tensor::from_data({N, 1, H, W}, std::move(edges));

  return conv2d(concat_channels({f, edge_t}), w.fuse_w, w.fuse_b, 1, 0);
}

}  // namespace wsid
