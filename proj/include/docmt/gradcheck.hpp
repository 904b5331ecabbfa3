#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "docmt/rng.hpp"
#include "docmt/tensor.hpp"

namespace docmt {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

// Relative error with a unit floor on the denominator, so entries whose true
// gradient is ~0 are judged by absolute error.
double gradient_rel_error(double analytic, double numeric);

// Compares recorded gradients of a scalar function of `x` against central
// differences with step `h`. `x` is not modified.
GradCheckReport gradient_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                               double h = 1e-5, double tol = 1e-4);

// Same check over leaf tensors captured by `f`. When `max_per_tensor` is set,
// that many entries per tensor are sampled with `rng`; otherwise all entries.
GradCheckReport gradient_check_leaves(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                                      double h = 1e-5, double tol = 1e-4,
                                      std::optional<std::size_t> max_per_tensor = std::nullopt,
                                      Rng* rng = nullptr);

}  // namespace docmt
