#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccmt/tensor.hpp"

namespace ccmt {

struct Parameter {
  std::string name;
  Tensor tensor;
};

// Ordered, name-unique collection of a model's trainable tensors. Order is
// registration order, which is also serialization and optimizer order.
class ParameterSet {
 public:
  // Registers a tensor (marked requires_grad) and returns the handle.
  Tensor add(std::string name, Tensor tensor);

  std::span<Parameter> items() { return params_; }
  std::span<const Parameter> items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);

  void zero_grad();

  // Snapshot / restore of all values, in registration order.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

  // Flat view helpers for finite differences.
  std::vector<double> flatten_values() const;
  void assign_flat(std::span<const double> flat);
  std::vector<double> flatten_grads() const;

 private:
  std::vector<Parameter> params_;
};

}  // namespace ccmt
