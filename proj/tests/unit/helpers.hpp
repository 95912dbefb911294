#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>
#include <vector>

#include "ccmt/numeric_grad.hpp"
#include "ccmt/random.hpp"
#include "ccmt/tensor.hpp"

namespace testing {

using Inputs = std::vector<ccmt::Tensor>;
using ScalarOf = std::function<ccmt::Tensor(const Inputs&)>;

inline ccmt::Tensor random_tensor(ccmt::Shape shape, std::uint64_t seed, double std = 1.0) {
  ccmt::Rng rng(seed);
  return ccmt::Tensor::normal(std::move(shape), std, rng);
}

// Largest relative error between backward() and central differences over all
// entries of all inputs.
inline double max_grad_error(const ScalarOf& f, Inputs inputs, double h = 1e-5) {
  for (auto& t : inputs) t.set_requires_grad(true);
  for (auto& t : inputs) t.clear_grad();
  f(inputs).backward();
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double> analytic(inputs[i].numel(), 0.0);
    if (inputs[i].has_grad()) std::copy(inputs[i].grad().begin(), inputs[i].grad().end(), analytic.begin());
    const std::vector<double> x(inputs[i].values().begin(), inputs[i].values().end());
    auto scalar = [&](std::span<const double> v) {
      ccmt::NoGradGuard guard;
      Inputs copy;
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        if (j == i)
          copy.emplace_back(inputs[i].shape(), std::vector<double>(v.begin(), v.end()));
        else
          copy.push_back(inputs[j].detach());
      }
      return f(copy).item();
    };
    const auto numeric = ccmt::finite_diff_grad(scalar, x, h);
    for (std::size_t k = 0; k < x.size(); ++k)
      worst = std::max(worst, ccmt::relative_error(analytic[k], numeric[k]));
  }
  return worst;
}

// Fresh scratch directory per test process.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ccmt_unit_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace testing
