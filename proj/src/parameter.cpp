#include "ccmt/parameter.hpp"

#include <algorithm>

#include "ccmt/error.hpp"

namespace ccmt {

Tensor ParameterSet::add(std::string name, Tensor tensor) {
  if (find(name)) throw ValidationError("duplicate parameter name '" + name + "'");
  tensor.set_requires_grad(true);
  params_.push_back({std::move(name), tensor});
  return tensor;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  auto it = std::find_if(params_.begin(), params_.end(),
                         [&](const Parameter& p) { return p.name == name; });
  return it == params_.end() ? nullptr : &*it;
}

Parameter* ParameterSet::find(const std::string& name) {
  return const_cast<Parameter*>(std::as_const(*this).find(name));
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<std::vector<double>> ParameterSet::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void ParameterSet::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size())
    throw ContractError("restore: snapshot has " + std::to_string(values.size()) +
                        " entries, model has " + std::to_string(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].tensor.mutable_values();
    if (values[i].size() != dst.size())
      throw ContractError("restore: size mismatch for '" + params_[i].name + "'");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

std::vector<double> ParameterSet::flatten_values() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_) out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void ParameterSet::assign_flat(std::span<const double> flat) {
  if (flat.size() != scalar_count())
    throw ContractError("assign_flat: expected " + std::to_string(scalar_count()) + " values");
  std::size_t off = 0;
  for (auto& p : params_) {
    auto dst = p.tensor.mutable_values();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), dst.size(), dst.begin());
    off += dst.size();
  }
}

std::vector<double> ParameterSet::flatten_grads() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& p : params_) {
    if (p.tensor.has_grad())
      out.insert(out.end(), p.tensor.grad().begin(), p.tensor.grad().end());
    else
      out.insert(out.end(), p.tensor.numel(), 0.0);
  }
  return out;
}

}  // namespace ccmt
