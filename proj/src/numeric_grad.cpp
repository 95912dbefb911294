#include "ccmt/numeric_grad.hpp"

#include <algorithm>
#include <cmath>

#include "ccmt/error.hpp"

namespace ccmt {

std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw ValidationError("finite_diff_grad: step h must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = probe[i];
    probe[i] = x0 + h;
    const double fp = f(probe);
    probe[i] = x0 - h;
    const double fm = f(probe);
    probe[i] = x0;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw OracleError("finite_diff_grad: non-finite function value at coordinate " + std::to_string(i));
    out[i] = (fp - fm) / (2.0 * h);
  }
  return out;
}

double relative_error(double a, double b, double floor) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

}  // namespace ccmt
