#pragma once

// Seeded gradient-check suites over the learned modules, shared by the
// gradcheck CLI subcommand, the unit tests, and the acceptance run.

#include <cstdint>
#include <string>
#include <vector>

namespace wsid {

struct GradCheckCase {
  std::string module;
  std::string name;
  double threshold = 1e-6;
  double max_rel_err = 0.0;
};

// `module` is one of da, be, branches, losses, or all. Errors are measured
// by central differences at sampled coordinates.
std::vector<GradCheckCase> run_gradcheck(const std::string& module,
                                         uint64_t seed,
                                         int coords_per_tensor = 20);

}  // namespace wsid
