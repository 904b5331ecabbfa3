#include "docmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "docmt/errors.hpp"

namespace docmt {

namespace {

double eval_scalar(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  const double v = f().item();
  if (!std::isfinite(v)) throw NumericError("gradient_check: function value is not finite");
  return v;
}

void check_entries(const std::function<Tensor()>& f, Tensor& leaf,
                   const std::vector<std::size_t>& indices, std::span<const double> analytic,
                   double h, GradCheckReport& report) {
  auto data = leaf.mutable_data();
  for (std::size_t i : indices) {
    const double saved = data[i];
    data[i] = saved + h;
    const double up = eval_scalar(f);
    data[i] = saved - h;
    const double down = eval_scalar(f);
    data[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    if (!std::isfinite(a)) throw NumericError("gradient_check: recorded gradient is not finite");
    report.max_abs_error = std::max(report.max_abs_error, std::abs(a - numeric));
    report.max_rel_error = std::max(report.max_rel_error, gradient_rel_error(a, numeric));
    ++report.checked;
  }
}

}  // namespace

double gradient_rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                               double h, double tol) {
  Tensor leaf = Tensor::from(x.shape(), std::vector<double>(x.data().begin(), x.data().end()),
                             true);
  return gradient_check_leaves([&] { return f(leaf); }, {leaf}, h, tol);
}

GradCheckReport gradient_check_leaves(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                                      double h, double tol,
                                      std::optional<std::size_t> max_per_tensor, Rng* rng) {
  for (Tensor& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor out = f();
  if (out.size() != 1) throw DimensionError("gradient_check: function must be scalar-valued");
  if (!std::isfinite(out.item())) throw NumericError("gradient_check: function value is not finite");
  out.backward();

  GradCheckReport report;
  for (Tensor& t : leaves) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<std::size_t> indices(t.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (max_per_tensor && indices.size() > *max_per_tensor) {
      if (!rng) throw ConfigError("gradient_check: sampling requires an rng");
      rng->shuffle(indices);
      indices.resize(*max_per_tensor);
    }
    check_entries(f, t, indices, analytic, h, report);
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace docmt
