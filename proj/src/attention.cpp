#include "ccmt/attention.hpp"

#include <cmath>

#include "ccmt/error.hpp"
#include "ccmt/random.hpp"

namespace ccmt {

std::string to_string(ResidualMode mode) {
  switch (mode) {
    case ResidualMode::Literal: return "literal";
    case ResidualMode::KvResidual: return "kv";
    case ResidualMode::QueryResidual: return "query";
  }
  return "kv";
}

ResidualMode parse_residual_mode(const std::string& s) {
  if (s == "literal") return ResidualMode::Literal;
  if (s == "kv") return ResidualMode::KvResidual;
  if (s == "query") return ResidualMode::QueryResidual;
  throw ValidationError("residual_mode: unknown value '" + s + "' (expected literal, kv or query)");
}

CrossAttentionParams make_block_params(ParameterSet& params, const std::string& prefix,
                                       const BlockDims& dims, Rng& rng, double init_std,
                                       Activation activation) {
  CrossAttentionParams p;
  p.activation = activation;
  const auto d = dims.d, dh = dims.d_head;
  for (std::size_t h = 0; h < dims.heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    p.w_query.push_back(params.add(hp + ".w_query", Tensor::normal({d, dh}, init_std, rng)));
    p.w_key.push_back(params.add(hp + ".w_key", Tensor::normal({d, dh}, init_std, rng)));
    p.w_value.push_back(params.add(hp + ".w_value", Tensor::normal({d, dh}, init_std, rng)));
  }
  p.out_proj = params.add(prefix + ".out_proj", Tensor::normal({dims.heads * dh, d}, init_std, rng));
  p.norm1_gamma = params.add(prefix + ".norm1.gamma", Tensor::full({d}, 1.0));
  p.norm1_beta = params.add(prefix + ".norm1.beta", Tensor::zeros({d}));
  p.norm2_gamma = params.add(prefix + ".norm2.gamma", Tensor::full({d}, 1.0));
  p.norm2_beta = params.add(prefix + ".norm2.beta", Tensor::zeros({d}));
  p.ff_in = params.add(prefix + ".ff.in.weight", Tensor::normal({d, dims.d_ff}, init_std, rng));
  p.ff_in_bias = params.add(prefix + ".ff.in.bias", Tensor::zeros({dims.d_ff}));
  p.ff_out = params.add(prefix + ".ff.out.weight", Tensor::normal({dims.d_ff, d}, init_std, rng));
  p.ff_out_bias = params.add(prefix + ".ff.out.bias", Tensor::zeros({d}));
  return p;
}

std::size_t block_parameter_count(const BlockDims& b) {
  return 3 * b.heads * b.d * b.d_head  // W_Q, W_K, W_V
         + b.heads * b.d_head * b.d    // output projection
         + 4 * b.d                     // two norms
         + b.d * b.d_ff + b.d_ff       // FF in
         + b.d_ff * b.d + b.d;         // FF out
}

Tensor attention_scores(const Tensor& q, const Tensor& k) {
  if (q.cols() != k.cols())
    throw DimensionError("attention: query width " + shape_to_string(q.shape()) +
                         " differs from key width " + shape_to_string(k.shape()));
  return scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.cols())));
}

AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (k.rows() != v.rows())
    throw DimensionError("attention: key rows " + shape_to_string(k.shape()) +
                         " differ from value rows " + shape_to_string(v.shape()));
  Tensor w = softmax_rows(attention_scores(q, k));
  return {matmul(w, v), w};
}

MultiHeadOutput multi_head_cross_attention(const Tensor& queries, const Tensor& keys_values,
                                           const CrossAttentionParams& params) {
  const std::size_t d = params.out_proj.cols();
  if (queries.cols() != d || keys_values.cols() != d)
    throw DimensionError("cross-attention: inputs " + shape_to_string(queries.shape()) + " / " +
                         shape_to_string(keys_values.shape()) + " must have width " +
                         std::to_string(d));
  MultiHeadOutput out;
  std::vector<Tensor> heads;
  heads.reserve(params.w_query.size());
  for (std::size_t h = 0; h < params.w_query.size(); ++h) {
    auto att = scaled_dot_attention(matmul(queries, params.w_query[h]),
                                    matmul(keys_values, params.w_key[h]),
                                    matmul(keys_values, params.w_value[h]));
    heads.push_back(att.output);
    out.weights.push_back(att.weights);
  }
  Tensor concat = heads.size() == 1 ? heads[0] : concat_cols(heads);
  out.output = matmul(concat, params.out_proj);
  return out;
}

namespace {

Tensor feed_forward(const Tensor& x, const CrossAttentionParams& p) {
  Tensor h = activate(add_bias(matmul(x, p.ff_in), p.ff_in_bias), p.activation);
  return add_bias(matmul(h, p.ff_out), p.ff_out_bias);
}

}  // namespace

BlockOutput ccmt_block_forward(const Tensor& queries, const Tensor& keys_values,
                               const CrossAttentionParams& params, ResidualMode mode) {
  if (mode != ResidualMode::QueryResidual && queries.rows() != keys_values.rows())
    throw DimensionError("ccmt block (" + to_string(mode) + " residual): query tokens " +
                         shape_to_string(queries.shape()) + " and key/value tokens " +
                         shape_to_string(keys_values.shape()) + " must have equal counts");
  auto att = multi_head_cross_attention(queries, keys_values, params);
  const Tensor& y = att.output;
  Tensor out;
  switch (mode) {
    case ResidualMode::Literal: {
      Tensor z = add(y, layer_norm(y, params.norm1_gamma, params.norm1_beta));
      out = add(z, feed_forward(layer_norm(z, params.norm2_gamma, params.norm2_beta), params));
      break;
    }
    case ResidualMode::KvResidual:
    case ResidualMode::QueryResidual: {
      const Tensor& skip = mode == ResidualMode::KvResidual ? keys_values : queries;
      Tensor z = layer_norm(add(y, skip), params.norm1_gamma, params.norm1_beta);
      out = layer_norm(add(z, feed_forward(z, params)), params.norm2_gamma, params.norm2_beta);
      break;
    }
  }
  return {out, std::move(att.weights)};
}

}  // namespace ccmt
