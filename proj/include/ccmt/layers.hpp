#pragma once

#include <string>

#include "ccmt/parameter.hpp"
#include "ccmt/tensor.hpp"

namespace ccmt {

class Rng;

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  Tensor operator()(const Tensor& x) const { return add_bias(matmul(x, weight), bias); }
};

Linear make_linear(ParameterSet& params, const std::string& prefix, std::size_t in,
                   std::size_t out, Rng& rng, double init_std);

// in -> hidden (activation) -> out. Used by every classification head.
struct MlpHead {
  Linear hidden;
  Linear output;
  Activation activation = Activation::Gelu;

  // x is one row [1 x in] (or a 1-D [in]); returns logits [out].
  Tensor operator()(const Tensor& x) const;
};

MlpHead make_mlp_head(ParameterSet& params, const std::string& prefix, std::size_t in,
                      std::size_t hidden, std::size_t out, Rng& rng, double init_std,
                      Activation activation);

constexpr std::size_t mlp_head_parameter_count(std::size_t in, std::size_t hidden, std::size_t out) {
  return in * hidden + hidden + hidden * out + out;
}

}  // namespace ccmt
