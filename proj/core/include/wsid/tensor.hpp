#pragma once

// Dense double-precision tensors (NCHW convention for feature maps) with
// reverse-mode automatic differentiation. The graph is embedded in the
// tensors: every op result keeps handles to its parents plus a closure that
// scatters the output gradient back to them. Ops that receive only constant
// inputs produce plain constants, so inference builds no graph.

#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace wsid {

using Shape = std::vector<int>;

long long shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until backward() touches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;  // null for leaves

  bool is_leaf() const { return parents.empty(); }
  void ensure_grad();
};

using NodePtr = std::shared_ptr<TensorNode>;

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev,
                      bool requires_grad = false);

  // Graph-building hook for ops defined outside this module. `backward_fn`
  // reads self.grad and accumulates into the parents' grad buffers; it must
  // not capture the output tensor itself (that would leak the graph).
  static Tensor make_op(Shape shape, std::vector<double> value,
                        std::vector<Tensor> parents,
                        std::function<void(detail::TensorNode&)> backward_fn);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int ndim() const;
  int dim(int i) const;
  long long numel() const;
  bool requires_grad() const;
  void set_requires_grad(bool rg);  // leaves only

  std::vector<double>& data();
  const std::vector<double>& data() const;
  const std::vector<double>& grad() const;
  bool has_grad() const;
  void zero_grad();

  double item() const;  // scalar tensors only
  double at(std::initializer_list<int> idx) const;

  // Reverse-mode accumulation from a scalar. Leaf gradients accumulate
  // across calls; every non-leaf gradient is reset at the start of a call.
  void backward() const;

  Tensor detach() const;

  detail::NodePtr node() const { return node_; }

 private:
  explicit Tensor(detail::NodePtr n) : node_(std::move(n)) {}
  detail::NodePtr node_;
};

enum class PoolMode { kAvg, kMax };

// Cross-correlation, weight [K,C,kh,kw], bias [K]. Output spatial extent is
// (H + 2*pad_h - kh)/stride + 1. Summation order is fixed (n,k,oy,ox outer;
// c,ky,kx inner, bias first) and matches the brute-force reference exactly.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad);
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad_h, int pad_w);

// Global spatial / per-pixel channel pooling. Max routes its gradient to the
// first argmax in row-major scan order.
Tensor pool_spatial(const Tensor& input, PoolMode mode);
Tensor pool_channel(const Tensor& input, PoolMode mode);

// x [N,Cin] * w [Cout,Cin] -> [N,Cout], no bias.
Tensor linear(const Tensor& x, const Tensor& w);
// w2 * relu(w1 * x) with hidden width C/reduction, no biases.
Tensor mlp2(const Tensor& x, const Tensor& w1, const Tensor& w2,
            int reduction);

// align_corners = false, border-replicating sample clamp.
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor sub(const Tensor& a, const Tensor& b);
// Elementwise with NCHW broadcasting over singleton axes on either side.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double k);
Tensor add_scalar(const Tensor& x, double c);

Tensor concat_channels(const std::vector<Tensor>& xs);
std::vector<Tensor> split_channels(const Tensor& x,
                                   const std::vector<int>& sizes);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);  // -> shape [1]
Tensor mean(const Tensor& x);

}  // namespace wsid
