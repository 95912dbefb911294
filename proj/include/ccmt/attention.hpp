#pragma once

// Cross-attention and the cascaded transformer block built on it.

#include <optional>
#include <string>
#include <vector>

#include "ccmt/parameter.hpp"
#include "ccmt/tensor.hpp"

namespace ccmt {

class Rng;

// How the block sums and normalizes around attention and feed-forward.
//   Literal:       Z = Y + Norm(Y);            out = Z + FF(Norm(Z))
//   KvResidual:    Z = Norm(Y + keys_values);  out = Norm(Z + FF(Z))
//   QueryResidual: Z = Norm(Y + queries);      out = Norm(Z + FF(Z))
// Literal and KvResidual need as many queries as key/value tokens.
enum class ResidualMode { Literal, KvResidual, QueryResidual };

std::string to_string(ResidualMode mode);
ResidualMode parse_residual_mode(const std::string& s);  // literal | kv | query

struct BlockDims {
  std::size_t d = 0;        // token width
  std::size_t d_head = 0;   // per-head width
  std::size_t heads = 0;
  std::size_t d_ff = 0;     // feed-forward hidden width
};

struct CrossAttentionParams {
  std::vector<Tensor> w_query;  // heads x [d x d_head]
  std::vector<Tensor> w_key;
  std::vector<Tensor> w_value;
  Tensor out_proj;              // [(heads * d_head) x d]
  Tensor norm1_gamma, norm1_beta;
  Tensor norm2_gamma, norm2_beta;
  Tensor ff_in, ff_in_bias;     // [d x d_ff], [d_ff]
  Tensor ff_out, ff_out_bias;   // [d_ff x d], [d]
  Activation activation = Activation::Gelu;
};

// Registers one block's parameters under `prefix` (e.g. "block1.0"):
// projections ~ N(0, init_std^2), norm gamma = 1, beta = 0, biases 0.
CrossAttentionParams make_block_params(ParameterSet& params, const std::string& prefix,
                                       const BlockDims& dims, Rng& rng, double init_std,
                                       Activation activation);

// Analytic parameter count of one block.
std::size_t block_parameter_count(const BlockDims& dims);

// q k^T / sqrt(d_head), the pre-softmax attention logits.
Tensor attention_scores(const Tensor& q, const Tensor& k);

struct AttentionOutput {
  Tensor output;   // [k_q x d_head] or [k_q x d]
  Tensor weights;  // [k_q x k_v] for single-head, one per head otherwise
};

// softmax(q k^T / sqrt(d_head)) v
AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

struct MultiHeadOutput {
  Tensor output;                // [k_q x d]
  std::vector<Tensor> weights;  // per head [k_q x k_v]
};

// Per head h: softmax((Q W_Qh)(KV W_Kh)^T / sqrt(d_head)) (KV W_Vh); heads are
// concatenated along features and projected back to width d.
MultiHeadOutput multi_head_cross_attention(const Tensor& queries, const Tensor& keys_values,
                                           const CrossAttentionParams& params);

struct BlockOutput {
  Tensor output;                // [k_q x d]
  std::vector<Tensor> weights;  // per head attention weights
};

BlockOutput ccmt_block_forward(const Tensor& queries, const Tensor& keys_values,
                               const CrossAttentionParams& params, ResidualMode mode);

}  // namespace ccmt
