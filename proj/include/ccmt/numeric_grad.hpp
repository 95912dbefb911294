#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ccmt {

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
// Throws OracleError if any evaluation is non-finite.
std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h = 1e-5);

// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero gradients from
// being judged on round-off alone.
double relative_error(double a, double b, double floor = 1e-6);

}  // namespace ccmt
