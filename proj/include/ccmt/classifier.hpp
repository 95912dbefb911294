#pragma once

#include <span>
#include <string>

#include "ccmt/parameter.hpp"
#include "ccmt/tensor.hpp"
#include "ccmt/tokens.hpp"

namespace ccmt {

// Anything trainable that maps a uniform token set to class logits. CCMT and
// the fusion baselines share this surface so they see identical inputs.
class Classifier {
 public:
  virtual ~Classifier() = default;

  // Logits of shape [num_classes]. Records the autodiff graph unless a
  // NoGradGuard is active.
  virtual Tensor forward(const UniformTokenSet& sample) const = 0;

  virtual ParameterSet& parameters() = 0;
  virtual const ParameterSet& parameters() const = 0;
  virtual std::size_t num_classes() const = 0;
  // k used when assembling this model's inputs.
  virtual std::size_t tokens_per_modality() const = 0;
  virtual std::string kind() const = 0;
};

// First index of the maximum; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

std::size_t predict(const Classifier& model, const UniformTokenSet& sample);

}  // namespace ccmt
