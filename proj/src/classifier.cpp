#include "ccmt/classifier.hpp"

#include "ccmt/error.hpp"

namespace ccmt {

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ValidationError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t predict(const Classifier& model, const UniformTokenSet& sample) {
  NoGradGuard no_grad;
  return argmax(model.forward(sample).values());
}

}  // namespace ccmt
