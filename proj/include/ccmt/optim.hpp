#pragma once

#include <cstdint>
#include <vector>

#include "ccmt/parameter.hpp"

namespace ccmt {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  explicit AdamState(AdamOptions opts = {}) : options(opts) {}

  AdamOptions options;
  std::uint64_t step_count = 0;
  // One entry per parameter, in ParameterSet order; sized on first step.
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// Bias-corrected Adam update over every parameter. Every parameter must hold
// a gradient (ContractError naming it otherwise). Gradients are zeroed after
// the update only when zero_grad is set.
void adam_step(ParameterSet& params, AdamState& state, bool zero_grad = false);

}  // namespace ccmt
