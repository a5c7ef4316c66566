#include "wsid/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wsid {

namespace {

ConvLayer conv_layer(int out_c, int in_c, int kh, int kw, std::mt19937_64& rng,
                     double gain = 2.0) {
  ConvLayer l;
  const double fan_in = (double)in_c * kh * kw;
  l.w = Tensor::randn({out_c, in_c, kh, kw}, rng, std::sqrt(gain / fan_in), true);
  l.b = Tensor::zeros({out_c}, true);
  return l;
}

Tensor resize_to(const Tensor& x, const Tensor& ref) {
  if (x.dim(2) == ref.dim(2) && x.dim(3) == ref.dim(3)) return x;
  return bilinear_resize(x, ref.dim(2), ref.dim(3));
}

Tensor mask_tensor(const Plane& p, double tau, long long* count = nullptr) {
  std::vector<double> d(p.size());
  long long m = 0;
  for (size_t i = 0; i < p.v.size(); ++i) {
    d[i] = p.v[i] >= tau ? 1.0 : 0.0;
    m += d[i] != 0.0;
  }
  if (count) *count = m;
  return Tensor::from_data({1, 1, p.h, p.w}, std::move(d));
}

Tensor const_plane(const Plane& p) {
  return Tensor::from_data({1, 1, p.h, p.w}, p.v);
}

constexpr double kLogEps = 1e-7;

}  // namespace

WsidModel model_init(uint64_t seed, bool use_da, bool use_be) {
  std::mt19937_64 rng(seed);
  WsidModel m;
  m.use_da = use_da;
  m.use_be = use_be;

  auto make_encoder = [&rng]() {
    EncoderWeights e;
    int in_c = 3;
    for (int i = 0; i < 5; ++i) {
      e.stages[i] = conv_layer(kEncoderChannels[i], in_c, 3, 3, rng);
      in_c = kEncoderChannels[i];
    }
    return e;
  };
  m.enc_sal = make_encoder();
  m.enc_bnd = make_encoder();
  m.enc_ctr = make_encoder();

  for (int i = 0; i < 5; ++i) m.da[i] = da_init(kEncoderChannels[i], 4, rng);
  m.be = be_init(rng);

  const int bnd_in = 16 + 32 + 64 + 64 + 64 + (use_be ? kBeChannels : 0);
  m.bhead.out = conv_layer(1, bnd_in, 3, 3, rng, 1.0);
  m.chead.fh = conv_layer(64, 192, 3, 3, rng);
  m.chead.c1 = conv_layer(32, 64 + 16 + 32, 3, 3, rng);
  m.chead.c2 = conv_layer(2, 32, 3, 3, rng, 1.0);
  m.sdec.d1 = conv_layer(64, 128, 3, 3, rng);
  m.sdec.d2 = conv_layer(32, 96, 3, 3, rng);
  m.sdec.d3 = conv_layer(16, 48, 3, 3, rng);
  m.sdec.out = conv_layer(1, 16, 1, 1, rng, 1.0);
  return m;
}

std::vector<std::pair<std::string, Tensor>> named_params(const WsidModel& m) {
  std::vector<std::pair<std::string, Tensor>> out;
  auto enc = [&out](const char* prefix, const EncoderWeights& e) {
    for (int i = 0; i < 5; ++i) {
      const std::string s = std::string(prefix) + ".s" + std::to_string(i + 1);
      out.push_back({s + ".w", e.stages[i].w});
      out.push_back({s + ".b", e.stages[i].b});
    }
  };
  enc("enc_sal", m.enc_sal);
  enc("enc_bnd", m.enc_bnd);
  enc("enc_ctr", m.enc_ctr);
  for (int i = 0; i < 5; ++i) {
    const std::string s = "da" + std::to_string(i + 1);
    out.push_back({s + ".mlp_w1", m.da[i].mlp_w1});
    out.push_back({s + ".mlp_w2", m.da[i].mlp_w2});
    out.push_back({s + ".conv_w", m.da[i].conv7_w});
    out.push_back({s + ".conv_b", m.da[i].conv7_b});
  }
  out.push_back({"be.c17.w", m.be.c17_w});
  out.push_back({"be.c17.b", m.be.c17_b});
  out.push_back({"be.c71.w", m.be.c71_w});
  out.push_back({"be.c71.b", m.be.c71_b});
  for (int i = 0; i < 3; ++i) {
    const std::string s = "be.res" + std::to_string(i + 1);
    out.push_back({s + ".w1", m.be.res[i].w1});
    out.push_back({s + ".b1", m.be.res[i].b1});
    out.push_back({s + ".w2", m.be.res[i].w2});
    out.push_back({s + ".b2", m.be.res[i].b2});
  }
  out.push_back({"be.fuse.w", m.be.fuse_w});
  out.push_back({"be.fuse.b", m.be.fuse_b});
  out.push_back({"bhead.w", m.bhead.out.w});
  out.push_back({"bhead.b", m.bhead.out.b});
  out.push_back({"chead.fh.w", m.chead.fh.w});
  out.push_back({"chead.fh.b", m.chead.fh.b});
  out.push_back({"chead.c1.w", m.chead.c1.w});
  out.push_back({"chead.c1.b", m.chead.c1.b});
  out.push_back({"chead.c2.w", m.chead.c2.w});
  out.push_back({"chead.c2.b", m.chead.c2.b});
  out.push_back({"sdec.d1.w", m.sdec.d1.w});
  out.push_back({"sdec.d1.b", m.sdec.d1.b});
  out.push_back({"sdec.d2.w", m.sdec.d2.w});
  out.push_back({"sdec.d2.b", m.sdec.d2.b});
  out.push_back({"sdec.d3.w", m.sdec.d3.w});
  out.push_back({"sdec.d3.b", m.sdec.d3.b});
  out.push_back({"sdec.out.w", m.sdec.out.w});
  out.push_back({"sdec.out.b", m.sdec.out.b});
  return out;
}

FeaturePyramid backbone_forward(const EncoderWeights& enc, const Tensor& image) {
  if (image.ndim() != 4 || image.dim(1) != 3)
    throw std::invalid_argument("backbone_forward: expected [N,3,H,W], got " +
                                shape_str(image.shape()));
  if (image.dim(2) % 16 != 0 || image.dim(3) % 16 != 0)
    throw std::invalid_argument(
        "backbone_forward: spatial extent must be divisible by 16");
  FeaturePyramid pyr;
  Tensor x = image;
  for (int i = 0; i < 5; ++i) {
    const int stride = i < 4 ? 2 : 1;
    x = relu(conv2d(x, enc.stages[i].w, enc.stages[i].b, stride, 1));
    pyr.f[i] = x;
  }
  return pyr;
}

namespace {

FeaturePyramid refine_pyramid(const WsidModel& m, const FeaturePyramid& pyr) {
  if (!m.use_da) return pyr;
  FeaturePyramid out;
  for (int i = 0; i < 5; ++i) out.f[i] = da_forward(pyr.f[i], m.da[i]);
  return out;
}

}  // namespace

Tensor centroid_branch_forward(const WsidModel& m, const FeaturePyramid& pyr) {
  const FeaturePyramid p = refine_pyramid(m, pyr);
  Tensor high = concat_channels(
      {p.f[2], resize_to(p.f[3], p.f[2]), resize_to(p.f[4], p.f[2])});
  Tensor fh = conv2d(high, m.chead.fh.w, m.chead.fh.b, 1, 1);
  Tensor low = concat_channels(
      {resize_to(fh, p.f[0]), p.f[0], resize_to(p.f[1], p.f[0])});
  Tensor z = conv2d(conv2d(low, m.chead.c1.w, m.chead.c1.b, 1, 1),
                    m.chead.c2.w, m.chead.c2.b, 1, 1);
  const int H = pyr.f[0].dim(2) * 2, W = pyr.f[0].dim(3) * 2;
  Tensor y = sigmoid(bilinear_resize(z, H, W));
  return add_scalar(scale(y, 2.0), -1.0);  // (0,1) -> (-1,1)
}

Tensor boundary_branch_forward(const WsidModel& m, const FeaturePyramid& pyr,
                               const Tensor& image) {
  const FeaturePyramid p = refine_pyramid(m, pyr);
  std::vector<Tensor> feats;
  for (int i = 0; i < 5; ++i)
    feats.push_back(bilinear_resize(p.f[i], image.dim(2), image.dim(3)));
  if (m.use_be) feats.push_back(be_forward(image, m.be));
  return sigmoid(conv2d(concat_channels(feats), m.bhead.out.w, m.bhead.out.b, 1, 1));
}

Tensor saliency_branch_forward(const WsidModel& m, const FeaturePyramid& pyr) {
  Tensor x = concat_channels({resize_to(pyr.f[4], pyr.f[2]), pyr.f[2]});
  x = relu(conv2d(x, m.sdec.d1.w, m.sdec.d1.b, 1, 1));
  x = concat_channels({resize_to(x, pyr.f[1]), pyr.f[1]});
  x = relu(conv2d(x, m.sdec.d2.w, m.sdec.d2.b, 1, 1));
  x = concat_channels({resize_to(x, pyr.f[0]), pyr.f[0]});
  x = relu(conv2d(x, m.sdec.d3.w, m.sdec.d3.b, 1, 1));
  x = conv2d(x, m.sdec.out.w, m.sdec.out.b, 1, 0);
  const int H = pyr.f[0].dim(2) * 2, W = pyr.f[0].dim(3) * 2;
  return sigmoid(bilinear_resize(x, H, W));
}

BranchOutputs forward_all(const WsidModel& m, const Tensor& image) {
  BranchOutputs out;
  out.saliency = saliency_branch_forward(m, backbone_forward(m.enc_sal, image));
  out.boundary =
      boundary_branch_forward(m, backbone_forward(m.enc_bnd, image), image);
  out.offsets = centroid_branch_forward(m, backbone_forward(m.enc_ctr, image));
  return out;
}

Tensor loss_saliency(const Tensor& S, const Plane& pseudo_mask) {
  if (S.dim(2) != pseudo_mask.h || S.dim(3) != pseudo_mask.w)
    throw std::invalid_argument("loss_saliency: mask size mismatch");
  Tensor y = const_plane(pseudo_mask);
  Tensor one_minus_y = add_scalar(scale(y, -1.0), 1.0);
  Tensor p = clamp(S, kLogEps, 1.0 - kLogEps);
  Tensor q = add_scalar(scale(p, -1.0), 1.0);
  Tensor ll = add(mul(y, log(p)), mul(one_minus_y, log(q)));
  return scale(sum(ll), -1.0 / (double)(pseudo_mask.h * pseudo_mask.w));
}

Tensor loss_boundary(const Tensor& B, const Plane& pseudo_boundary) {
  if (B.dim(2) != pseudo_boundary.h || B.dim(3) != pseudo_boundary.w)
    throw std::invalid_argument("loss_boundary: boundary size mismatch");
  const long long total = (long long)pseudo_boundary.h * pseudo_boundary.w;
  long long pos = 0;
  for (double v : pseudo_boundary.v) pos += v > 0.5;
  const long long neg = total - pos;
  const double w_pos = pos > 0 ? (double)total / (2.0 * pos) : 0.0;
  const double w_neg = neg > 0 ? (double)total / (2.0 * neg) : 0.0;

  std::vector<double> wv(pseudo_boundary.size());
  for (size_t i = 0; i < wv.size(); ++i)
    wv[i] = pseudo_boundary.v[i] > 0.5 ? w_pos : w_neg;
  Tensor wt = Tensor::from_data({1, 1, pseudo_boundary.h, pseudo_boundary.w},
                                std::move(wv));
  Tensor y = const_plane(pseudo_boundary);
  Tensor one_minus_y = add_scalar(scale(y, -1.0), 1.0);
  Tensor p = clamp(B, kLogEps, 1.0 - kLogEps);
  Tensor q = add_scalar(scale(p, -1.0), 1.0);
  Tensor ll = add(mul(y, log(p)), mul(one_minus_y, log(q)));
  return scale(sum(mul(wt, ll)), -1.0 / (double)total);
}

Tensor loss_centroid(const Tensor& V, const Plane& off_x, const Plane& off_y,
                     const Plane& sal_mask, double tau_s) {
  if (V.ndim() != 4 || V.dim(1) != 2)
    throw std::invalid_argument("loss_centroid: expected [1,2,H,W] offsets");
  const int H = V.dim(2), W = V.dim(3);
  if (off_x.h != H || off_x.w != W || sal_mask.h != H || sal_mask.w != W)
    throw std::invalid_argument("loss_centroid: plane size mismatch");
  long long m = 0;
  Tensor mask = mask_tensor(sal_mask, tau_s, &m);
  if (m == 0) return Tensor::from_data({1}, {0.0});

  std::vector<double> tgt(2LL * H * W);
  std::copy(off_x.v.begin(), off_x.v.end(), tgt.begin());
  std::copy(off_y.v.begin(), off_y.v.end(), tgt.begin() + (long long)H * W);
  Tensor target = Tensor::from_data({1, 2, H, W}, std::move(tgt));
  Tensor diff = abs(sub(V, target));
  return scale(sum(mul(mask, diff)), 1.0 / (2.0 * m));
}

Tensor loss_subitizing(const Tensor& V, const Plane& sal_mask, double tau_s,
                       int t_star) {
  if (t_star < 0)
    throw std::invalid_argument("loss_subitizing: t_star must be >= 0");
  std::vector<uint8_t> mask(sal_mask.size());
  long long m = 0;
  for (size_t i = 0; i < mask.size(); ++i) {
    mask[i] = sal_mask.v[i] >= tau_s ? 1 : 0;
    m += mask[i];
  }
  if (m == 0) return Tensor::from_data({1}, {0.0});

  CentroidParams params;
  params.tau_mass = tau_mass_for_count((double)m, std::max(t_star, 1));
  Tensor votes = splat_votes(V, mask);
  Tensor c = soft_count(votes, params);
  Tensor d = add_scalar(c, -(double)t_star);
  return mul(d, d);
}

double poly_lr(const TrainConfig& cfg, long long itr, long long max_itr) {
  if (max_itr <= 0) throw std::invalid_argument("poly_lr: max_itr must be > 0");
  if (itr < 0 || itr > max_itr)
    throw std::invalid_argument("poly_lr: itr out of [0, max_itr]");
  return cfg.lr_init * std::pow(1.0 - (double)itr / (double)max_itr, cfg.gamma);
}

namespace {

struct Sgd {
  std::vector<Tensor> params;
  std::vector<std::vector<double>> velocity;
  double momentum;

  explicit Sgd(std::vector<Tensor> ps, double mu) : params(std::move(ps)), momentum(mu) {
    velocity.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i)
      velocity[i].assign(params[i].numel(), 0.0);
  }

  void zero_grads() {
    for (auto& p : params) p.zero_grad();
  }

  void step(double lr, double grad_scale) {
    for (size_t i = 0; i < params.size(); ++i) {
      if (!params[i].has_grad()) continue;
      const auto& g = params[i].grad();
      auto& v = velocity[i];
      auto& w = params[i].data();
      for (size_t j = 0; j < w.size(); ++j) {
        v[j] = momentum * v[j] + g[j] * grad_scale;
        w[j] -= lr * v[j];
      }
    }
  }
};

std::vector<Tensor> branch_params(WsidModel& m, Branch b) {
  std::vector<Tensor> ps;
  auto push_enc = [&ps](EncoderWeights& e) {
    for (auto& s : e.stages) {
      ps.push_back(s.w);
      ps.push_back(s.b);
    }
  };
  switch (b) {
    case Branch::kSaliency:
      push_enc(m.enc_sal);
      for (ConvLayer* l : {&m.sdec.d1, &m.sdec.d2, &m.sdec.d3, &m.sdec.out}) {
        ps.push_back(l->w);
        ps.push_back(l->b);
      }
      break;
    case Branch::kBoundary:
      push_enc(m.enc_bnd);
      if (m.use_be) {
        ps.push_back(m.be.c17_w);
        ps.push_back(m.be.c17_b);
        ps.push_back(m.be.c71_w);
        ps.push_back(m.be.c71_b);
        for (auto& blk : m.be.res) {
          ps.push_back(blk.w1);
          ps.push_back(blk.b1);
          ps.push_back(blk.w2);
          ps.push_back(blk.b2);
        }
        ps.push_back(m.be.fuse_w);
        ps.push_back(m.be.fuse_b);
      }
      ps.push_back(m.bhead.out.w);
      ps.push_back(m.bhead.out.b);
      if (m.use_da)
        for (auto& da : m.da) {
          ps.push_back(da.mlp_w1);
          ps.push_back(da.mlp_w2);
          ps.push_back(da.conv7_w);
          ps.push_back(da.conv7_b);
        }
      break;
    case Branch::kCentroid:
      push_enc(m.enc_ctr);
      for (ConvLayer* l : {&m.chead.fh, &m.chead.c1, &m.chead.c2}) {
        ps.push_back(l->w);
        ps.push_back(l->b);
      }
      if (m.use_da)
        for (auto& da : m.da) {
          ps.push_back(da.mlp_w1);
          ps.push_back(da.mlp_w2);
          ps.push_back(da.conv7_w);
          ps.push_back(da.conv7_b);
        }
      break;
    case Branch::kAll:
      throw std::logic_error("branch_params: expand kAll before calling");
  }
  return ps;
}

void train_phase(WsidModel& m, const std::vector<TrainSample>& data,
                 const TrainConfig& cfg, const LossWeights& lw, Branch b,
                 std::vector<TrainLogRow>& log) {
  const char* name = b == Branch::kSaliency  ? "saliency"
                     : b == Branch::kBoundary ? "boundary"
                                              : "centroid";
  Sgd opt(branch_params(m, b), cfg.momentum);
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + (uint64_t)b + 1);

  const long long per_epoch = (data.size() + cfg.batch - 1) / cfg.batch;
  const long long max_itr =
      cfg.max_itr > 0 ? cfg.max_itr : (long long)cfg.epochs * per_epoch;

  std::vector<int> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);

  long long itr = 0;
  for (int epoch = 0; epoch < cfg.epochs && itr < max_itr; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t start = 0; start < idx.size() && itr < max_itr;
         start += cfg.batch, ++itr) {
      const double lr = poly_lr(cfg, itr, max_itr);
      opt.zero_grads();
      double loss_sum = 0.0;
      int used = 0;
      const size_t stop = std::min(idx.size(), start + cfg.batch);
      for (size_t k = start; k < stop; ++k) {
        const TrainSample& s = data[idx[k]];
        Tensor loss;
        if (b == Branch::kSaliency) {
          FeaturePyramid pyr = backbone_forward(m.enc_sal, s.image);
          loss = scale(loss_saliency(saliency_branch_forward(m, pyr), s.pseudo_sal),
                       lw.sal);
        } else if (b == Branch::kBoundary) {
          FeaturePyramid pyr = backbone_forward(m.enc_bnd, s.image);
          loss = scale(
              loss_boundary(boundary_branch_forward(m, pyr, s.image), s.pseudo_bnd),
              lw.bnd);
        } else {
          FeaturePyramid pyr = backbone_forward(m.enc_ctr, s.image);
          Tensor V = centroid_branch_forward(m, pyr);
          loss = scale(loss_centroid(V, s.off_x, s.off_y, s.pseudo_sal), lw.l1);
          if (lw.su != 0.0)
            loss = add(loss,
                       scale(loss_subitizing(V, s.pseudo_sal, 0.5, s.t_star), lw.su));
        }
        const double lv = loss.item();
        if (!std::isfinite(lv))
          throw std::runtime_error(std::string("train: non-finite ") + name +
                                   " loss at iteration " + std::to_string(itr));
        loss_sum += lv;
        ++used;
        if (loss.requires_grad()) loss.backward();
      }
      if (used > 0) opt.step(lr, 1.0 / used);
      log.push_back({name, itr, lr, used > 0 ? loss_sum / used : 0.0});
    }
  }
}

}  // namespace

std::vector<TrainLogRow> train(WsidModel& m, const std::vector<TrainSample>& data,
                               const TrainConfig& cfg, const LossWeights& weights,
                               Branch branch) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch < 1 || cfg.epochs < 1 || cfg.lr_init <= 0)
    throw std::invalid_argument("train: bad config");
  std::vector<TrainLogRow> log;
  if (branch == Branch::kAll) {
    train_phase(m, data, cfg, weights, Branch::kSaliency, log);
    train_phase(m, data, cfg, weights, Branch::kBoundary, log);
    train_phase(m, data, cfg, weights, Branch::kCentroid, log);
  } else {
    train_phase(m, data, cfg, weights, branch, log);
  }
  return log;
}

InferResult infer_image(const WsidModel& m, const Tensor& image,
                        const FuseParams& params) {
  BranchOutputs out = forward_all(m, image);
  return infer_from_maps(plane_from_tensor(out.saliency),
                         plane_from_tensor(out.boundary), out.offsets.detach(),
                         params);
}

}  // namespace wsid
