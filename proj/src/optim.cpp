#include "ccmt/optim.hpp"

#include <cmath>

#include "ccmt/error.hpp"

namespace ccmt {

void adam_step(ParameterSet& params, AdamState& state, bool zero_grad) {
  auto items = params.items();
  for (const auto& p : items)
    if (!p.tensor.has_grad()) throw ContractError("adam_step: parameter '" + p.name + "' has no gradient");

  if (state.first_moment.empty() && state.step_count == 0) {
    for (const auto& p : items) {
      state.first_moment.emplace_back(p.tensor.numel(), 0.0);
      state.second_moment.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != items.size())
    throw ContractError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                        " parameters, model has " + std::to_string(items.size()));

  const auto& o = state.options;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto w = items[i].tensor.mutable_values();
    auto g = items[i].tensor.grad();
    if (m.size() != w.size())
      throw ContractError("adam_step: moment size mismatch for '" + items[i].name + "'");
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= o.lr * mhat / (std::sqrt(vhat) + o.epsilon);
    }
    if (zero_grad) items[i].tensor.zero_grad();
  }
}

}  // namespace ccmt
