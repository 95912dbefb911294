#include "ccmt/layers.hpp"

#include "ccmt/random.hpp"

namespace ccmt {

Linear make_linear(ParameterSet& params, const std::string& prefix, std::size_t in,
                   std::size_t out, Rng& rng, double init_std) {
  Linear l;
  l.weight = params.add(prefix + ".weight", Tensor::normal({in, out}, init_std, rng));
  l.bias = params.add(prefix + ".bias", Tensor::zeros({out}));
  return l;
}

Tensor MlpHead::operator()(const Tensor& x) const {
  Tensor in = x.ndim() == 1 ? reshape(x, {1, x.numel()}) : x;
  Tensor logits = output(activate(hidden(in), activation));
  return reshape(logits, {logits.numel()});
}

MlpHead make_mlp_head(ParameterSet& params, const std::string& prefix, std::size_t in,
                      std::size_t hidden, std::size_t out, Rng& rng, double init_std,
                      Activation activation) {
  MlpHead h;
  h.hidden = make_linear(params, prefix + ".fc1", in, hidden, rng, init_std);
  h.output = make_linear(params, prefix + ".fc2", hidden, out, rng, init_std);
  h.activation = activation;
  return h;
}

}  // namespace ccmt
