#include "wsid/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace wsid {

long long shape_numel(const Shape& s) {
  long long n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace detail {

void TensorNode::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

}  // namespace detail

namespace {

using detail::NodePtr;
using detail::TensorNode;

void check_shape(const Shape& s, const char* who) {
  if (s.empty()) throw std::invalid_argument(std::string(who) + ": empty shape");
  for (int d : s)
    if (d <= 0)
      throw std::invalid_argument(std::string(who) + ": non-positive extent in " +
                                  shape_str(s));
}

NodePtr make_leaf(Shape shape, std::vector<double> data, bool rg) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = rg;
  return n;
}

bool any_requires(const std::vector<Tensor>& ps) {
  for (const auto& p : ps)
    if (p.requires_grad()) return true;
  return false;
}

// Unary elementwise helper: f(value) forward, g = df/dx factor from saved
// data in the closure.
Tensor unary_op(const Tensor& x, std::vector<double> value,
                std::function<void(const std::vector<double>& out_grad,
                                   std::vector<double>& x_grad)>
                    scatter) {
  if (!x.requires_grad())
    return Tensor::from_data(x.shape(), std::move(value));
  Tensor xc = x;
  return Tensor::make_op(
      x.shape(), std::move(value), {x},
      [xc, scatter = std::move(scatter)](TensorNode& self) {
        xc.node()->ensure_grad();
        scatter(self.grad, xc.node()->grad);
      });
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape, "zeros");
  long long n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0),
                          requires_grad));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  check_shape(shape, "full");
  long long n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, v),
                          requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  check_shape(shape, "from_data");
  if (shape_numel(shape) != (long long)data.size())
    throw std::invalid_argument("from_data: " + shape_str(shape) + " needs " +
                                std::to_string(shape_numel(shape)) +
                                " values, got " + std::to_string(data.size()));
  return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev,
                     bool requires_grad) {
  check_shape(shape, "randn");
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> d(shape_numel(shape));
  for (auto& v : d) v = dist(rng);
  return Tensor(make_leaf(std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::make_op(Shape shape, std::vector<double> value,
                       std::vector<Tensor> parents,
                       std::function<void(TensorNode&)> backward_fn) {
  check_shape(shape, "make_op");
  if (shape_numel(shape) != (long long)value.size())
    throw std::invalid_argument("make_op: value size mismatch for " +
                                shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = any_requires(parents);
  if (n->requires_grad) {
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(n);
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("shape() on undefined tensor");
  return node_->shape;
}

int Tensor::ndim() const { return (int)shape().size(); }

int Tensor::dim(int i) const {
  const Shape& s = shape();
  if (i < 0 || i >= (int)s.size())
    throw std::out_of_range("dim " + std::to_string(i) + " of " + shape_str(s));
  return s[i];
}

long long Tensor::numel() const { return shape_numel(shape()); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool rg) {
  if (!node_) throw std::logic_error("set_requires_grad on undefined tensor");
  if (!node_->is_leaf())
    throw std::logic_error("set_requires_grad: only leaf tensors");
  node_->requires_grad = rg;
}

std::vector<double>& Tensor::data() {
  if (!node_) throw std::logic_error("data() on undefined tensor");
  return node_->value;
}

const std::vector<double>& Tensor::data() const {
  if (!node_) throw std::logic_error("data() on undefined tensor");
  return node_->value;
}

const std::vector<double>& Tensor::grad() const {
  if (!node_) throw std::logic_error("grad() on undefined tensor");
  if (node_->grad.empty())
    throw std::logic_error("grad(): no gradient accumulated yet");
  return node_->grad;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1)
    throw std::invalid_argument("item(): tensor has " +
                                std::to_string(numel()) + " elements");
  return node_->value[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size())
    throw std::invalid_argument("at(): rank mismatch for " + shape_str(s));
  long long off = 0;
  size_t i = 0;
  for (int v : idx) {
    if (v < 0 || v >= s[i])
      throw std::out_of_range("at(): index " + std::to_string(v) +
                              " out of range for dim " + std::to_string(i));
    off = off * s[i] + v;
    ++i;
  }
  return node_->value[off];
}

void Tensor::backward() const {
  if (!node_) throw std::logic_error("backward() on undefined tensor");
  if (numel() != 1)
    throw std::invalid_argument("backward(): loss must be scalar, got " +
                                shape_str(shape()));
  if (!node_->requires_grad)
    throw std::logic_error("backward(): loss does not depend on any parameter");

  // Iterative post-order DFS; each node visited exactly once.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.push_back({node_.get(), 0});
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      TensorNode* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Non-leaf grads are per-call scratch; leaf grads persist and accumulate.
  for (TensorNode* n : order) {
    if (n->is_leaf())
      n->ensure_grad();
    else
      n->grad.assign(n->value.size(), 0.0);
  }
  node_->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

Tensor Tensor::detach() const {
  if (!node_) return Tensor();
  return from_data(node_->shape, node_->value, false);
}

// ----------------------------------------------------------------------------
// Ops

namespace {

void require_4d(const Tensor& t, const char* who) {
  if (t.ndim() != 4)
    throw std::invalid_argument(std::string(who) + ": expected NCHW tensor, got " +
                                shape_str(t.shape()));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad) {
  return conv2d(input, weight, bias, stride, pad, pad);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad_h, int pad_w) {
  require_4d(input, "conv2d");
  require_4d(weight, "conv2d");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad_h < 0 || pad_w < 0)
    throw std::invalid_argument("conv2d: pad must be >= 0");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2),
            W = input.dim(3);
  const int K = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != C)
    throw std::invalid_argument("conv2d: input channels " + std::to_string(C) +
                                " != weight channels " +
                                std::to_string(weight.dim(1)));
  if (bias.ndim() != 1 || bias.dim(0) != K)
    throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) +
                                " != [" + std::to_string(K) + "]");
  const int OH = (H + 2 * pad_h - kh) / stride + 1;
  const int OW = (W + 2 * pad_w - kw) / stride + 1;
  if (OH < 1 || OW < 1)
    throw std::invalid_argument("conv2d: kernel " + shape_str(weight.shape()) +
                                " too large for input " +
                                shape_str(input.shape()));

  const auto& x = input.data();
  const auto& w = weight.data();
  const auto& b = bias.data();
  std::vector<double> y((long long)N * K * OH * OW);

  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double acc = b[k];
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride - pad_h + ky;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride - pad_w + kx;
                if (ix < 0 || ix >= W) continue;
                acc += x[((long long)(n * C + c) * H + iy) * W + ix] *
                       w[((long long)(k * C + c) * kh + ky) * kw + kx];
              }
            }
          y[((long long)(n * K + k) * OH + oy) * OW + ox] = acc;
        }

  Tensor xc = input, wc = weight, bc = bias;
  return Tensor::make_op(
      {N, K, OH, OW}, std::move(y), {input, weight, bias},
      [=](TensorNode& self) {
        const auto& g = self.grad;
        const bool gx = xc.requires_grad(), gw = wc.requires_grad(),
                   gb = bc.requires_grad();
        if (gx) xc.node()->ensure_grad();
        if (gw) wc.node()->ensure_grad();
        if (gb) bc.node()->ensure_grad();
        const auto& x = xc.data();
        const auto& w = wc.data();
        for (int n = 0; n < N; ++n)
          for (int k = 0; k < K; ++k)
            for (int oy = 0; oy < OH; ++oy)
              for (int ox = 0; ox < OW; ++ox) {
                const double go =
                    g[((long long)(n * K + k) * OH + oy) * OW + ox];
                if (go == 0.0) continue;
                if (gb) bc.node()->grad[k] += go;
                for (int c = 0; c < C; ++c)
                  for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - pad_h + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                      const int ix = ox * stride - pad_w + kx;
                      if (ix < 0 || ix >= W) continue;
                      const long long xi =
                          ((long long)(n * C + c) * H + iy) * W + ix;
                      const long long wi =
                          ((long long)(k * C + c) * kh + ky) * kw + kx;
                      if (gw) wc.node()->grad[wi] += go * x[xi];
                      if (gx) xc.node()->grad[xi] += go * w[wi];
                    }
                  }
              }
      });
}

Tensor pool_spatial(const Tensor& input, PoolMode mode) {
  require_4d(input, "pool_spatial");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2),
            W = input.dim(3);
  if (H < 1 || W < 1)
    throw std::invalid_argument("pool_spatial: empty spatial extent");
  const int HW = H * W;
  const auto& x = input.data();
  std::vector<double> y((long long)N * C);
  std::vector<int> argmax(mode == PoolMode::kMax ? N * C : 0);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const long long base = (long long)(n * C + c) * HW;
      if (mode == PoolMode::kAvg) {
        double s = 0.0;
        for (int i = 0; i < HW; ++i) s += x[base + i];
        y[n * C + c] = s / HW;
      } else {
        int best = 0;
        for (int i = 1; i < HW; ++i)
          if (x[base + i] > x[base + best]) best = i;  // first max wins
        y[n * C + c] = x[base + best];
        argmax[n * C + c] = best;
      }
    }

  Tensor xc = input;
  return Tensor::make_op(
      {N, C, 1, 1}, std::move(y), {input},
      [=, argmax = std::move(argmax)](TensorNode& self) {
        xc.node()->ensure_grad();
        auto& gx = xc.node()->grad;
        for (int nc = 0; nc < N * C; ++nc) {
          const double go = self.grad[nc];
          const long long base = (long long)nc * HW;
          if (mode == PoolMode::kAvg) {
            const double gshare = go / HW;
            for (int i = 0; i < HW; ++i) gx[base + i] += gshare;
          } else {
            gx[base + argmax[nc]] += go;
          }
        }
      });
}

Tensor pool_channel(const Tensor& input, PoolMode mode) {
  require_4d(input, "pool_channel");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2),
            W = input.dim(3);
  if (C < 1) throw std::invalid_argument("pool_channel: empty channel extent");
  const int HW = H * W;
  const auto& x = input.data();
  std::vector<double> y((long long)N * HW);
  std::vector<int> argmax(mode == PoolMode::kMax ? N * HW : 0);
  for (int n = 0; n < N; ++n)
    for (int i = 0; i < HW; ++i) {
      if (mode == PoolMode::kAvg) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += x[((long long)(n * C + c)) * HW + i];
        y[(long long)n * HW + i] = s / C;
      } else {
        int best = 0;
        for (int c = 1; c < C; ++c)
          if (x[((long long)(n * C + c)) * HW + i] >
              x[((long long)(n * C + best)) * HW + i])
            best = c;
        y[(long long)n * HW + i] = x[((long long)(n * C + best)) * HW + i];
        argmax[(long long)n * HW + i] = best;
      }
    }

  Tensor xc = input;
  return Tensor::make_op(
      {N, 1, H, W}, std::move(y), {input},
      [=, argmax = std::move(argmax)](TensorNode& self) {
        xc.node()->ensure_grad();
        auto& gx = xc.node()->grad;
        for (int n = 0; n < N; ++n)
          for (int i = 0; i < HW; ++i) {
            const double go = self.grad[(long long)n * HW + i];
            if (mode == PoolMode::kAvg) {
              const double gshare = go / C;
              for (int c = 0; c < C; ++c)
                gx[((long long)(n * C + c)) * HW + i] += gshare;
            } else {
              gx[((long long)(n * C + argmax[(long long)n * HW + i])) * HW + i] +=
                  go;
            }
          }
      });
}

Tensor linear(const Tensor& x, const Tensor& w) {
  if (x.ndim() != 2 || w.ndim() != 2)
    throw std::invalid_argument("linear: expected 2-D x and w, got " +
                                shape_str(x.shape()) + " and " +
                                shape_str(w.shape()));
  const int N = x.dim(0), Cin = x.dim(1), Cout = w.dim(0);
  if (w.dim(1) != Cin)
    throw std::invalid_argument("linear: x features " + std::to_string(Cin) +
                                " != w features " + std::to_string(w.dim(1)));
  const auto& xd = x.data();
  const auto& wd = w.data();
  std::vector<double> y((long long)N * Cout);
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < Cout; ++o) {
      double acc = 0.0;
      for (int i = 0; i < Cin; ++i) acc += xd[n * Cin + i] * wd[o * Cin + i];
      y[n * Cout + o] = acc;
    }

  Tensor xc = x, wc = w;
  return Tensor::make_op(
      {N, Cout}, std::move(y), {x, w}, [=](TensorNode& self) {
        const bool gx = xc.requires_grad(), gw = wc.requires_grad();
        if (gx) xc.node()->ensure_grad();
        if (gw) wc.node()->ensure_grad();
        const auto& xd = xc.data();
        const auto& wd = wc.data();
        for (int n = 0; n < N; ++n)
          for (int o = 0; o < Cout; ++o) {
            const double go = self.grad[n * Cout + o];
            if (go == 0.0) continue;
            for (int i = 0; i < Cin; ++i) {
              if (gx) xc.node()->grad[n * Cin + i] += go * wd[o * Cin + i];
              if (gw) wc.node()->grad[o * Cin + i] += go * xd[n * Cin + i];
            }
          }
      });
}

Tensor mlp2(const Tensor& x, const Tensor& w1, const Tensor& w2,
            int reduction) {
  if (x.ndim() != 2)
    throw std::invalid_argument("mlp2: expected 2-D input, got " +
                                shape_str(x.shape()));
  const int C = x.dim(1);
  if (reduction < 1 || C % reduction != 0)
    throw std::invalid_argument("mlp2: reduction " + std::to_string(reduction) +
                                " does not divide channels " +
                                std::to_string(C));
  const int hidden = C / reduction;
  if (w1.ndim() != 2 || w1.dim(0) != hidden || w1.dim(1) != C)
    throw std::invalid_argument("mlp2: w1 shape " + shape_str(w1.shape()) +
                                " != [" + std::to_string(hidden) + "," +
                                std::to_string(C) + "]");
  if (w2.ndim() != 2 || w2.dim(0) != C || w2.dim(1) != hidden)
    throw std::invalid_argument("mlp2: w2 shape " + shape_str(w2.shape()) +
                                " != [" + std::to_string(C) + "," +
                                std::to_string(hidden) + "]");
  return linear(relu(linear(x, w1)), w2);
}

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
  require_4d(x, "bilinear_resize");
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("bilinear_resize: output extent must be >= 1");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);

  struct Tap {
    int lo, hi;
    double f;  // weight of hi sample
  };
  auto make_taps = [](int in, int out) {
    std::vector<Tap> taps(out);
    const double r = (double)in / out;
    for (int o = 0; o < out; ++o) {
      const double s = (o + 0.5) * r - 0.5;
      const int lo = (int)std::floor(s);
      const double f = s - lo;
      taps[o] = {std::clamp(lo, 0, in - 1), std::clamp(lo + 1, 0, in - 1), f};
    }
    return taps;
  };
  const auto ty = make_taps(H, out_h);
  const auto tx = make_taps(W, out_w);

  const auto& xd = x.data();
  std::vector<double> y((long long)N * C * out_h * out_w);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const long long in_base = (long long)(n * C + c) * H * W;
      const long long out_base = (long long)(n * C + c) * out_h * out_w;
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          const Tap& a = ty[oy];
          const Tap& b = tx[ox];
          const double v00 = xd[in_base + (long long)a.lo * W + b.lo];
          const double v01 = xd[in_base + (long long)a.lo * W + b.hi];
          const double v10 = xd[in_base + (long long)a.hi * W + b.lo];
          const double v11 = xd[in_base + (long long)a.hi * W + b.hi];
          y[out_base + (long long)oy * out_w + ox] =
              (1 - a.f) * ((1 - b.f) * v00 + b.f * v01) +
              a.f * ((1 - b.f) * v10 + b.f * v11);
        }
    }

  Tensor xc = x;
  return Tensor::make_op(
      {N, C, out_h, out_w}, std::move(y), {x},
      [=, ty = std::move(ty), tx = std::move(tx)](TensorNode& self) {
        xc.node()->ensure_grad();
        auto& gx = xc.node()->grad;
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const long long in_base = (long long)(n * C + c) * H * W;
            const long long out_base = (long long)(n * C + c) * out_h * out_w;
            for (int oy = 0; oy < out_h; ++oy)
              for (int ox = 0; ox < out_w; ++ox) {
                const double go = self.grad[out_base + (long long)oy * out_w + ox];
                if (go == 0.0) continue;
                const Tap& a = ty[oy];
                const Tap& b = tx[ox];
                gx[in_base + (long long)a.lo * W + b.lo] +=
                    go * (1 - a.f) * (1 - b.f);
                gx[in_base + (long long)a.lo * W + b.hi] += go * (1 - a.f) * b.f;
                gx[in_base + (long long)a.hi * W + b.lo] += go * a.f * (1 - b.f);
                gx[in_base + (long long)a.hi * W + b.hi] += go * a.f * b.f;
              }
          }
      });
}

Tensor sigmoid(const Tensor& x) {
  const auto& xd = x.data();
  std::vector<double> y(xd.size());
  for (size_t i = 0; i < xd.size(); ++i) {
    const double v = xd[i];
    y[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                  : std::exp(v) / (1.0 + std::exp(v));
  }
  std::vector<double> saved = y;
  return unary_op(x, std::move(y),
                  [saved = std::move(saved)](const std::vector<double>& g,
                                             std::vector<double>& gx) {
                    for (size_t i = 0; i < g.size(); ++i)
                      gx[i] += g[i] * saved[i] * (1.0 - saved[i]);
                  });
}

Tensor relu(const Tensor& x) {
  const auto& xd = x.data();
  std::vector<double> y(xd.size());
  for (size_t i = 0; i < xd.size(); ++i) y[i] = xd[i] > 0 ? xd[i] : 0.0;
  Tensor xc = x;
  return unary_op(x, std::move(y),
                  [xc](const std::vector<double>& g, std::vector<double>& gx) {
                    const auto& xd = xc.data();
                    for (size_t i = 0; i < g.size(); ++i)
                      if (xd[i] > 0) gx[i] += g[i];
                  });
}

Tensor log(const Tensor& x) {
  const auto& xd = x.data();
  std::vector<double> y(xd.size());
  for (size_t i = 0; i < xd.size(); ++i) y[i] = std::log(xd[i]);
  Tensor xc = x;
  return unary_op(x, std::move(y),
                  [xc](const std::vector<double>& g, std::vector<double>& gx) {
                    const auto& xd = xc.data();
                    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xd[i];
                  });
}

Tensor abs(const Tensor& x) {
  const auto& xd = x.data();
  std::vector<double> y(xd.size());
  for (size_t i = 0; i < xd.size(); ++i) y[i] = std::fabs(xd[i]);
  Tensor xc = x;
  return unary_op(x, std::move(y),
                  [xc](const std::vector<double>& g, std::vector<double>& gx) {
                    const auto& xd = xc.data();
                    for (size_t i = 0; i < g.size(); ++i) {
                      if (xd[i] > 0)
                        gx[i] += g[i];
                      else if (xd[i] < 0)
                        gx[i] -= g[i];
                    }
                  });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  const auto& xd = x.data();
  std::vector<double> y(xd.size());
  for (size_t i = 0; i < xd.size(); ++i) y[i] = std::clamp(xd[i], lo, hi);
  Tensor xc = x;
  return unary_op(x, std::move(y),
                  [xc, lo, hi](const std::vector<double>& g,
                               std::vector<double>& gx) {
                    const auto& xd = xc.data();
                    for (size_t i = 0; i < g.size(); ++i)
                      if (xd[i] >= lo && xd[i] <= hi) gx[i] += g[i];
                  });
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(who) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& ad = a.data();
  const auto& bd = b.data();
  std::vector<double> y(ad.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = ad[i] + bd[i];
  Tensor ac = a, bc = b;
  return Tensor::make_op(a.shape(), std::move(y), {a, b},
                         [ac, bc](TensorNode& self) {
                           for (const Tensor& t : {ac, bc}) {
                             if (!t.requires_grad()) continue;
                             t.node()->ensure_grad();
                             auto& g = t.node()->grad;
                             for (size_t i = 0; i < g.size(); ++i)
                               g[i] += self.grad[i];
                           }
                         });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto& ad = a.data();
  const auto& bd = b.data();
  std::vector<double> y(ad.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = ad[i] - bd[i];
  Tensor ac = a, bc = b;
  return Tensor::make_op(a.shape(), std::move(y), {a, b},
                         [ac, bc](TensorNode& self) {
                           if (ac.requires_grad()) {
                             ac.node()->ensure_grad();
                             for (size_t i = 0; i < self.grad.size(); ++i)
                               ac.node()->grad[i] += self.grad[i];
                           }
                           if (bc.requires_grad()) {
                             bc.node()->ensure_grad();
                             for (size_t i = 0; i < self.grad.size(); ++i)
                               bc.node()->grad[i] -= self.grad[i];
                           }
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  // Fast path: identical shapes, any rank.
  if (a.shape() == b.shape()) {
    const auto& ad = a.data();
    const auto& bd = b.data();
    std::vector<double> y(ad.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = ad[i] * bd[i];
    Tensor ac = a, bc = b;
    return Tensor::make_op(a.shape(), std::move(y), {a, b},
                           [ac, bc](TensorNode& self) {
                             if (ac.requires_grad()) {
                               ac.node()->ensure_grad();
                               const auto& bd = bc.data();
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 ac.node()->grad[i] += self.grad[i] * bd[i];
                             }
                             if (bc.requires_grad()) {
                               bc.node()->ensure_grad();
                               const auto& ad = ac.data();
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 bc.node()->grad[i] += self.grad[i] * ad[i];
                             }
                           });
  }

  // NCHW broadcast over singleton axes.
  if (a.ndim() != 4 || b.ndim() != 4)
    throw std::invalid_argument("mul: shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()) +
                                " (broadcast needs NCHW)");
  Shape out(4);
  for (int i = 0; i < 4; ++i) {
    const int da = a.dim(i), db = b.dim(i);
    if (da != db && da != 1 && db != 1)
      throw std::invalid_argument("mul: incompatible dim " + std::to_string(i) +
                                  " in " + shape_str(a.shape()) + " vs " +
                                  shape_str(b.shape()));
    out[i] = std::max(da, db);
  }

  auto index_of = [](const Shape& s, int n, int c, int h, int w) {
    const int nn = s[0] == 1 ? 0 : n;
    const int cc = s[1] == 1 ? 0 : c;
    const int hh = s[2] == 1 ? 0 : h;
    const int ww = s[3] == 1 ? 0 : w;
    return ((long long)(nn * s[1] + cc) * s[2] + hh) * s[3] + ww;
  };

  const auto& ad = a.data();
  const auto& bd = b.data();
  std::vector<double> y(shape_numel(out));
  long long o = 0;
  for (int n = 0; n < out[0]; ++n)
    for (int c = 0; c < out[1]; ++c)
      for (int h = 0; h < out[2]; ++h)
        for (int w = 0; w < out[3]; ++w)
          y[o++] = ad[index_of(a.shape(), n, c, h, w)] *
                   bd[index_of(b.shape(), n, c, h, w)];

  Tensor ac = a, bc = b;
  Shape outc = out;
  return Tensor::make_op(
      std::move(out), std::move(y), {a, b},
      [ac, bc, outc, index_of](TensorNode& self) {
        const bool ga = ac.requires_grad(), gb = bc.requires_grad();
        if (ga) ac.node()->ensure_grad();
        if (gb) bc.node()->ensure_grad();
        const auto& ad = ac.data();
        const auto& bd = bc.data();
        long long o = 0;
        for (int n = 0; n < outc[0]; ++n)
          for (int c = 0; c < outc[1]; ++c)
            for (int h = 0; h < outc[2]; ++h)
              for (int w = 0; w < outc[3]; ++w, ++o) {
                const double go = self.grad[o];
                if (go == 0.0) continue;
                const long long ia = index_of(ac.shape(), n, c, h, w);
                const long long ib = index_of(bc.shape(), n, c, h, w);
                if (ga) ac.node()->grad[ia] += go * bd[ib];
                if (gb) bc.node()->grad[ib] += go * ad[ia];
              }
      });
}

Tensor scale(const Tensor& x, double k) {
  const auto& xd = x.data();
  std::vector<double> y(xd.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = xd[i] * k;
  return unary_op(x, std::move(y),
                  [k](const std::vector<double>& g, std::vector<double>& gx) {
                    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * k;
                  });
}

Tensor add_scalar(const Tensor& x, double c) {
  const auto& xd = x.data();
  std::vector<double> y(xd.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = xd[i] + c;
  return unary_op(x, std::move(y),
                  [](const std::vector<double>& g, std::vector<double>& gx) {
                    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                  });
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  for (const auto& t : xs) require_4d(t, "concat_channels");
  const int N = xs[0].dim(0), H = xs[0].dim(2), W = xs[0].dim(3);
  int C = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].dim(0) != N || xs[i].dim(2) != H || xs[i].dim(3) != W)
      throw std::invalid_argument(
          "concat_channels: input " + std::to_string(i) + " shape " +
          shape_str(xs[i].shape()) + " differs outside the channel axis");
    C += xs[i].dim(1);
  }
  const int HW = H * W;
  std::vector<double> y((long long)N * C * HW);
  for (int n = 0; n < N; ++n) {
    int c0 = 0;
    for (const auto& t : xs) {
      const int tc = t.dim(1);
      const auto& td = t.data();
      std::copy(td.begin() + (long long)n * tc * HW,
                td.begin() + (long long)(n + 1) * tc * HW,
                y.begin() + ((long long)n * C + c0) * HW);
      c0 += tc;
    }
  }

  std::vector<Tensor> parents = xs;
  return Tensor::make_op(
      {N, C, H, W}, std::move(y), xs, [parents, N, C, HW](TensorNode& self) {
        int c0 = 0;
        for (const auto& t : parents) {
          const int tc = t.dim(1);
          if (t.requires_grad()) {
            t.node()->ensure_grad();
            auto& g = t.node()->grad;
            for (int n = 0; n < N; ++n)
              for (long long i = 0; i < (long long)tc * HW; ++i)
                g[(long long)n * tc * HW + i] +=
                    self.grad[((long long)n * C + c0) * HW + i];
          }
          c0 += tc;
        }
      });
}

std::vector<Tensor> split_channels(const Tensor& x,
                                   const std::vector<int>& sizes) {
  require_4d(x, "split_channels");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  int total = 0;
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("split_channels: non-positive size");
    total += s;
  }
  if (total != C)
    throw std::invalid_argument("split_channels: sizes sum " +
                                std::to_string(total) + " != channels " +
                                std::to_string(C));
  const int HW = H * W;
  std::vector<Tensor> out;
  int c0 = 0;
  for (int s : sizes) {
    std::vector<double> y((long long)N * s * HW);
    const auto& xd = x.data();
    for (int n = 0; n < N; ++n)
      std::copy(xd.begin() + ((long long)n * C + c0) * HW,
                xd.begin() + ((long long)n * C + c0 + s) * HW,
                y.begin() + (long long)n * s * HW);
    Tensor xc = x;
    const int off = c0;
    out.push_back(Tensor::make_op(
        {N, s, H, W}, std::move(y), {x}, [xc, N, C, HW, s, off](TensorNode& self) {
          xc.node()->ensure_grad();
          auto& g = xc.node()->grad;
          for (int n = 0; n < N; ++n)
            for (long long i = 0; i < (long long)s * HW; ++i)
              g[((long long)n * C + off) * HW + i] +=
                  self.grad[(long long)n * s * HW + i];
        }));
    c0 += s;
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_shape(shape, "reshape");
  if (shape_numel(shape) != x.numel())
    throw std::invalid_argument("reshape: " + shape_str(x.shape()) + " to " +
                                shape_str(shape) + " changes element count");
  Tensor xc = x;
  return Tensor::make_op(std::move(shape), x.data(), {x},
                         [xc](TensorNode& self) {
                           xc.node()->ensure_grad();
                           auto& g = xc.node()->grad;
                           for (size_t i = 0; i < g.size(); ++i)
                             g[i] += self.grad[i];
                         });
}

Tensor sum(const Tensor& x) {
  const auto& xd = x.data();
  double s = 0.0;
  for (double v : xd) s += v;
  Tensor xc = x;
  return Tensor::make_op({1}, {s}, {x}, [xc](TensorNode& self) {
    xc.node()->ensure_grad();
    auto& g = xc.node()->grad;
    const double go = self.grad[0];
    for (size_t i = 0; i < g.size(); ++i) g[i] += go;
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / x.numel()); }

}  // namespace wsid
