#include "wsid/checks.hpp"

#include <stdexcept>

#include "wsid/attention.hpp"
#include "wsid/boundary.hpp"
#include "wsid/centroid.hpp"
#include "wsid/gradcheck.hpp"
#include "wsid/net.hpp"

namespace wsid {

namespace {

// Weighting the checked map by a random constant makes the loss sensitive to
// every output element.
Tensor weighted_sum(const Tensor& map, const Tensor& weights) {
  return sum(mul(map, weights));
}

struct Harness {
  uint64_t seed;
  int coords;
  std::vector<GradCheckCase> out;

  void run(const std::string& module, const std::string& name, double threshold,
           const ScalarProgram& fn, std::vector<Tensor> inputs) {
    std::mt19937_64 rng(seed ^ std::hash<std::string>{}(name));
    GradCheckCase c;
    c.module = module;
    c.name = name;
    c.threshold = threshold;
    c.max_rel_err = grad_check(fn, inputs, 1e-5, coords, &rng);
    out.push_back(c);
  }
};

void da_cases(Harness& h) {
  std::mt19937_64 rng(h.seed * 2654435761u + 1);
  const int C = 8;
  DaWeights w = da_init(C, 4, rng);
  Tensor f = Tensor::randn({1, C, 6, 6}, rng, 1.0);
  Tensor rc = Tensor::randn({1, C, 1, 1}, rng, 1.0);
  Tensor rs = Tensor::randn({1, 1, 6, 6}, rng, 1.0);
  Tensor rf = Tensor::randn({1, C, 6, 6}, rng, 1.0);

  h.run("da", "channel_attention", 1e-6,
        [C, rc](const std::vector<Tensor>& in) {
          DaWeights w;
          w.channels = C;
          w.reduction = 4;
          w.mlp_w1 = in[1];
          w.mlp_w2 = in[2];
          return weighted_sum(channel_attention(in[0], w), rc);
        },
        {f, w.mlp_w1, w.mlp_w2});
  h.run("da", "spatial_attention", 1e-6,
        [C, rs](const std::vector<Tensor>& in) {
          DaWeights w;
          w.channels = C;
          w.reduction = 4;
          w.conv7_w = in[1];
          w.conv7_b = in[2];
          return weighted_sum(spatial_attention(in[0], w), rs);
        },
        {f, w.conv7_w, w.conv7_b});
  h.run("da", "da_forward", 1e-6,
        [C, rf](const std::vector<Tensor>& in) {
          DaWeights w;
          w.channels = C;
          w.reduction = 4;
          w.mlp_w1 = in[1];
          w.mlp_w2 = in[2];
          w.conv7_w = in[3];
          w.conv7_b = in[4];
          return weighted_sum(da_forward(in[0], w), rf);
        },
        {f, w.mlp_w1, w.mlp_w2, w.conv7_w, w.conv7_b});
}

void be_cases(Harness& h) {
  std::mt19937_64 rng(h.seed * 2654435761u + 2);
  BeWeights w = be_init(rng);
  Tensor x = Tensor::randn({1, kBeChannels, 8, 8}, rng, 1.0);
  Tensor rres = Tensor::randn({1, kBeChannels, 8, 8}, rng, 1.0);

  h.run("be", "residual_block", 1e-6,
        [rres](const std::vector<Tensor>& in) {
          BeResBlock blk{in[1], in[2], in[3], in[4]};
          return weighted_sum(residual_block(in[0], blk), rres);
        },
        {x, w.res[0].w1, w.res[0].b1, w.res[0].w2, w.res[0].b2});

  // Image values are fixed; gradients flow into the BE weights only and the
  // Canny plane stays constant.
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> img(3 * 16 * 16);
  for (auto& v : img) v = uni(rng);
  Tensor image = Tensor::from_data({1, 3, 16, 16}, std::move(img));
  Tensor rbe = Tensor::randn({1, kBeChannels, 16, 16}, rng, 1.0);
  h.run("be", "be_forward", 1e-6,
        [image, rbe](const std::vector<Tensor>& in) {
          BeWeights w;
          w.c17_w = in[0];
          w.c17_b = in[1];
          w.c71_w = in[2];
          w.c71_b = in[3];
          for (int i = 0; i < 3; ++i)
            w.res[i] = {in[4 + 4 * i], in[5 + 4 * i], in[6 + 4 * i],
                        in[7 + 4 * i]};
          w.fuse_w = in[16];
          w.fuse_b = in[17];
          return weighted_sum(be_forward(image, w), rbe);
        },
        {w.c17_w, w.c17_b, w.c71_w, w.c71_b, w.res[0].w1, w.res[0].b1,
         w.res[0].w2, w.res[0].b2, w.res[1].w1, w.res[1].b1, w.res[1].w2,
         w.res[1].b2, w.res[2].w1, w.res[2].b1, w.res[2].w2, w.res[2].b2,
         w.fuse_w, w.fuse_b});
}

void branch_cases(Harness& h) {
  std::mt19937_64 rng(h.seed * 2654435761u + 3);
  WsidModel m = model_init(h.seed + 17);
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  std::vector<double> img(3 * 16 * 16);
  for (auto& v : img) v = uni(rng);
  Tensor image = Tensor::from_data({1, 3, 16, 16}, std::move(img));

  Tensor rv = Tensor::randn({1, 2, 16, 16}, rng, 1.0);
  h.run("branches", "centroid_branch", 1e-6,
        [&m, image, rv](const std::vector<Tensor>& in) {
          WsidModel local = m;
          local.chead.fh.w = in[0];
          local.chead.c1.w = in[1];
          local.chead.c2.w = in[2];
          local.da[0].mlp_w1 = in[3];
          local.da[0].conv7_w = in[4];
          local.enc_ctr.stages[0].w = in[5];
          FeaturePyramid pyr = backbone_forward(local.enc_ctr, image);
          return weighted_sum(centroid_branch_forward(local, pyr), rv);
        },
        {m.chead.fh.w, m.chead.c1.w, m.chead.c2.w, m.da[0].mlp_w1,
         m.da[0].conv7_w, m.enc_ctr.stages[0].w});

  Tensor rb = Tensor::randn({1, 1, 16, 16}, rng, 1.0);
  h.run("branches", "boundary_branch", 1e-6,
        [&m, image, rb](const std::vector<Tensor>& in) {
          WsidModel local = m;
          local.bhead.out.w = in[0];
          local.bhead.out.b = in[1];
          local.be.fuse_w = in[2];
          local.da[4].mlp_w2 = in[3];
          local.enc_bnd.stages[0].w = in[4];
          FeaturePyramid pyr = backbone_forward(local.enc_bnd, image);
          return weighted_sum(boundary_branch_forward(local, pyr, image), rb);
        },
        {m.bhead.out.w, m.bhead.out.b, m.be.fuse_w, m.da[4].mlp_w2,
         m.enc_bnd.stages[0].w});

  Tensor rs = Tensor::randn({1, 1, 16, 16}, rng, 1.0);
  h.run("branches", "saliency_branch", 1e-6,
        [&m, image, rs](const std::vector<Tensor>& in) {
          WsidModel local = m;
          local.sdec.d1.w = in[0];
          local.sdec.d3.w = in[1];
          local.sdec.out.w = in[2];
          local.sdec.out.b = in[3];
          local.enc_sal.stages[1].w = in[4];
          FeaturePyramid pyr = backbone_forward(local.enc_sal, image);
          return weighted_sum(saliency_branch_forward(local, pyr), rs);
        },
        {m.sdec.d1.w, m.sdec.d3.w, m.sdec.out.w, m.sdec.out.b,
         m.enc_sal.stages[1].w});
}

void loss_cases(Harness& h) {
  std::mt19937_64 rng(h.seed * 2654435761u + 4);
  const int H = 8, W = 8;
  std::uniform_int_distribution<int> coin(0, 1);

  Plane mask(H, W);
  for (auto& v : mask.v) v = coin(rng);
  Tensor zs = Tensor::randn({1, 1, H, W}, rng, 1.0);
  h.run("losses", "loss_saliency", 1e-6,
        [&mask](const std::vector<Tensor>& in) {
          return loss_saliency(sigmoid(in[0]), mask);
        },
        {zs});

  Plane bnd(H, W);
  for (auto& v : bnd.v) v = coin(rng) && coin(rng);
  Tensor zb = Tensor::randn({1, 1, H, W}, rng, 1.0);
  h.run("losses", "loss_boundary", 1e-6,
        [&bnd](const std::vector<Tensor>& in) {
          return loss_boundary(sigmoid(in[0]), bnd);
        },
        {zb});

  Plane sal(H, W, 0.0);
  for (int y = 2; y < 6; ++y)
    for (int x = 1; x < 7; ++x) sal.at(y, x) = 1.0;
  Plane ox(H, W), oy(H, W);
  std::uniform_real_distribution<double> off(-0.4, 0.4);
  for (auto& v : ox.v) v = off(rng);
  for (auto& v : oy.v) v = off(rng);
  Tensor zc = Tensor::randn({1, 2, H, W}, rng, 1.0);
  h.run("losses", "loss_centroid", 1e-6,
        [&](const std::vector<Tensor>& in) {
          Tensor v = add_scalar(scale(sigmoid(in[0]), 2.0), -1.0);
          return loss_centroid(v, ox, oy, sal);
        },
        {zc});

  // Subitizing: the salient mask and the local-max mask are frozen; the
  // program stays smooth in V.
  std::vector<uint8_t> smask(H * W);
  long long count = 0;
  for (size_t i = 0; i < smask.size(); ++i) {
    smask[i] = sal.v[i] >= 0.5;
    count += smask[i];
  }
  CentroidParams cp;
  cp.tau_mass = tau_mass_for_count((double)count, 2);
  Tensor v0 = Tensor::randn({1, 2, H, W}, rng, 0.2);
  std::vector<uint8_t> frozen;
  {
    Tensor votes = splat_votes(v0.detach(), smask);
    Plane sp = plane_from_tensor(smooth_votes(votes, cp.sigma_vote));
    frozen = local_maxima(sp, cp.nms_radius);
  }
  h.run("losses", "loss_subitizing_frozen_mask", 1e-6,
        [&, cp](const std::vector<Tensor>& in) {
          Tensor votes = splat_votes(in[0], smask);
          Tensor c = soft_count(votes, cp, &frozen);
          Tensor d = add_scalar(c, -2.0);
          return mul(d, d);
        },
        {v0});
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck(const std::string& module,
                                         uint64_t seed, int coords_per_tensor) {
  Harness h{seed, coords_per_tensor, {}};
  bool matched = false;
  if (module == "da" || module == "all") {
    da_cases(h);
    matched = true;
  }
  if (module == "be" || module == "all") {
    be_cases(h);
    matched = true;
  }
  if (module == "branches" || module == "all") {
    branch_cases(h);
    matched = true;
  }
  if (module == "losses" || module == "all") {
    loss_cases(h);
    matched = true;
  }
  if (!matched)
    throw std::invalid_argument("run_gradcheck: unknown module '" + module +
                                "' (expected da|be|branches|losses|all)");
  return h.out;
}

}  // namespace wsid
