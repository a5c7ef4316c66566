#include "wsid/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wsid {

double grad_check(const ScalarProgram& fn, std::vector<Tensor>& inputs,
                  double eps, int max_coords_per_tensor, std::mt19937_64* rng) {
  if (inputs.empty()) throw std::invalid_argument("grad_check: no inputs");
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }

  Tensor loss = fn(inputs);
  if (loss.numel() != 1)
    throw std::invalid_argument("grad_check: program must return a scalar");
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& t : inputs) analytic.push_back(t.grad());

  double max_rel = 0.0;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = inputs[ti];
    const long long n = t.numel();
    std::vector<long long> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords_per_tensor > 0 && n > max_coords_per_tensor) {
      if (!rng)
        throw std::invalid_argument("grad_check: sampling needs an rng");
      std::shuffle(coords.begin(), coords.end(), *rng);
      coords.resize(max_coords_per_tensor);
    }
    for (long long ci : coords) {
      const double orig = t.data()[ci];
      t.data()[ci] = orig + eps;
      const double fp = fn(inputs).item();
      t.data()[ci] = orig - eps;
      const double fm = fn(inputs).item();
      t.data()[ci] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[ti][ci];
      const double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace wsid
