#pragma once

// Central finite-difference validation of the reverse-mode gradients.

#include <functional>
#include <random>
#include <vector>

#include "wsid/tensor.hpp"

namespace wsid {

// A pure function from leaf tensors to a scalar loss. It is re-evaluated
// many times with perturbed leaf values, so it must rebuild its graph from
// the inputs on every call.
using ScalarProgram = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares analytic gradients of `fn` w.r.t. every element of `inputs`
// against central differences. Relative error uses a max(|a|,|b|,1e-8)
// denominator. When `max_coords_per_tensor` > 0, only that many coordinates
// per tensor are checked (sampled with `rng`), which keeps large programs
// affordable; the analytic pass always covers everything.
double grad_check(const ScalarProgram& fn, std::vector<Tensor>& inputs,
                  double eps = 1e-5, int max_coords_per_tensor = 0,
                  std::mt19937_64* rng = nullptr);

}  // namespace wsid
