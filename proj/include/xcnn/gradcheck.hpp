#pragma once

#include <functional>
#include <string>

#include "xcnn/ops.hpp"

namespace xcnn {

struct GradcheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  bool nonfinite = false;  // forward or gradient produced NaN/Inf
  int checked = 0;         // coordinates compared
  int excluded = 0;        // coordinates skipped as subgradient points
  std::string note;
};

// f builds a scalar loss from x on the given tape. gradcheck compares the
// reverse-mode gradient of x against central differences, in double
// precision. Coordinates where the one-sided slopes disagree strongly
// (kinks such as relu at 0, max-pool ties) are excluded from the
// comparison and counted.
using ScalarFn = std::function<Tensor<double>(Tape<double>*, Tensor<double>&)>;

GradcheckReport gradcheck(const ScalarFn& f, Tensor<double> x,
                          double eps = 1e-5, double tol = 1e-4);

struct SuiteEntry {
  std::string name;
  GradcheckReport report;
};

// Runs gradcheck for every differentiable layer and primitive against
// `shapes_per_case` random small shapes each. Deterministic for a fixed
// seed.
std::vector<SuiteEntry> run_gradient_suite(int shapes_per_case = 20,
                                           uint32_t seed = 1234,
                                           double eps = 1e-5, double tol = 1e-4);

}  // namespace xcnn
