#pragma once

// The three-branch network at desk scale. A five-stage encoder (strides
// 2,4,8,16,16; channels 16,32,64,64,64) feeds each branch; the boundary and
// centroid branches refine their pyramids with shared DA weights. Fusion
// heads follow the published topologies:
//   f_h = Conv(Concat(f3', f4', f5'))
//   V   = sigmoid(Conv(Conv(Concat(f_h, f1', f2')))), mapped to 2*y - 1
//   B   = sigmoid(Conv(Concat(f1' .. f5', f_b)))
// with levels bilinearly resized to the finest resolution of each group
// before concatenation. The saliency branch uses a plain three-level
// decoder with skip concatenations.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wsid/attention.hpp"
#include "wsid/boundary.hpp"
#include "wsid/centroid.hpp"
#include "wsid/tensor.hpp"
#include "wsid/walker.hpp"

namespace wsid {

inline constexpr std::array<int, 5> kEncoderChannels = {16, 32, 64, 64, 64};
inline constexpr std::array<int, 5> kEncoderStrides = {2, 4, 8, 16, 16};

struct ConvLayer {
  Tensor w, b;
};

struct EncoderWeights {
  std::array<ConvLayer, 5> stages;
};

struct FeaturePyramid {
  std::array<Tensor, 5> f;
};

struct CentroidHead {
  ConvLayer fh;  // 192 -> 64
  ConvLayer c1;  // 112 -> 32
  ConvLayer c2;  // 32 -> 2
};

struct BoundaryHead {
  ConvLayer out;  // 248 -> 1 (240 without the BE features)
};

struct SaliencyDecoder {
  ConvLayer d1;   // 128 -> 64 at stride 8
  ConvLayer d2;   // 96 -> 32 at stride 4
  ConvLayer d3;   // 48 -> 16 at stride 2
  ConvLayer out;  // 16 -> 1, 1x1
};

struct WsidModel {
  bool use_da = true;
  bool use_be = true;
  EncoderWeights enc_sal, enc_bnd, enc_ctr;  // branches share nothing ...
  std::array<DaWeights, 5> da;               // ... except these two-branch weights
  BeWeights be;
  BoundaryHead bhead;
  CentroidHead chead;
  SaliencyDecoder sdec;
};

WsidModel model_init(uint64_t seed, bool use_da = true, bool use_be = true);

// Name/tensor view over every parameter, in a fixed order.
std::vector<std::pair<std::string, Tensor>> named_params(const WsidModel& m);

// Input images are [1,3,H,W] in [0,1] with H and W divisible by 16.
FeaturePyramid backbone_forward(const EncoderWeights& enc, const Tensor& image);

// Offsets [1,2,H,W] in (-1,1).
Tensor centroid_branch_forward(const WsidModel& m, const FeaturePyramid& pyr);
// Boundary probability map [1,1,H,W].
Tensor boundary_branch_forward(const WsidModel& m, const FeaturePyramid& pyr,
                               const Tensor& image);
// Saliency probability map [1,1,H,W].
Tensor saliency_branch_forward(const WsidModel& m, const FeaturePyramid& pyr);

struct BranchOutputs {
  Tensor saliency;  // S
  Tensor boundary;  // B
  Tensor offsets;   // V
};
BranchOutputs forward_all(const WsidModel& m, const Tensor& image);

// ---------------------------------------------------------------------------
// Losses. Supervision planes are constants; every loss is >= 0 and 0 at its
// own optimum.

// Pixel-mean binary cross entropy.
Tensor loss_saliency(const Tensor& S, const Plane& pseudo_mask);

// Class-balanced BCE: edge and non-edge pixels are weighted by inverse
// frequency, normalized so a uniform 0.5 prediction costs ln 2.
Tensor loss_boundary(const Tensor& B, const Plane& pseudo_boundary);

// Mean L1 between predicted and pseudo offsets over pixels with
// sal_mask >= tau_s; an empty mask gives a constant 0 with no gradient.
Tensor loss_centroid(const Tensor& V, const Plane& off_x, const Plane& off_y,
                     const Plane& sal_mask, double tau_s = 0.5);

// MSE between the differentiable soft count and t*. The salient mask and the
// local-max mask are constants, so the gradient reaches only the offsets of
// salient pixels.
Tensor loss_subitizing(const Tensor& V, const Plane& sal_mask, double tau_s,
                       int t_star);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double lr_init = 0.01;
  int batch = 4;
  int epochs = 4;
  double gamma = 0.9;  // poly exponent
  double momentum = 0.9;
  uint64_t seed = 1;
  long long max_itr = 0;  // 0: epochs * ceil(n / batch)
};

// lr_init * (1 - itr/max_itr)^gamma
double poly_lr(const TrainConfig& cfg, long long itr, long long max_itr);

struct TrainSample {
  Tensor image;  // [1,3,H,W] in [0,1]
  Plane pseudo_sal, pseudo_bnd;
  Plane off_x, off_y;
  int t_star = 1;
};

struct LossWeights {
  double sal = 1.0, bnd = 1.0, l1 = 1.0, su = 1.0;
};

enum class Branch { kSaliency, kBoundary, kCentroid, kAll };

struct TrainLogRow {
  std::string branch;
  long long itr = 0;
  double lr = 0.0;
  double loss = 0.0;
};

// Branches train sequentially (saliency, boundary, centroid); the shared DA
// weights keep evolving through the centroid phase. SGD with momentum and
// the poly schedule, deterministic for a fixed seed. Aborts with a
// diagnostic if a loss goes non-finite.
std::vector<TrainLogRow> train(WsidModel& m,
                               const std::vector<TrainSample>& data,
                               const TrainConfig& cfg,
                               const LossWeights& weights = {},
                               Branch branch = Branch::kAll);

// forward_all + map fusion.
InferResult infer_image(const WsidModel& m, const Tensor& image,
                        const FuseParams& params = {});

}  // namespace wsid
