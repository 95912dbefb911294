#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle to a shared node. Every op that has at least one
// gradient-requiring input records its inputs and a backward rule on the
// result node, so a forward pass builds the tape dynamically. backward() on a
// scalar walks that graph in reverse topological order and accumulates
// gradients additively into every reachable node that requires them.
//
// Values are 64-bit. Shapes are 1-D or 2-D; 1-D tensors act as 1 x n rows
// where an op needs a matrix.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ccmt {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Rng;
class Tensor;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  // Returns grad, allocating zeros on first use.
  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

class Tensor {
 public:
  using BackwardFn = std::function<void(detail::Node&)>;

  Tensor();  // empty 0-element tensor
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor normal(Shape shape, double stddev, Rng& rng, bool requires_grad = false);

  // Builds an op result. Records parents and the backward rule only when
  // grad mode is on and some parent requires a gradient. This is the
  // extension point for custom ops; backward_fn reads node.grad and adds into
  // parents' grad_buffer() for parents that require grad.
  static Tensor from_op(Shape shape, std::vector<double> values,
                        std::vector<Tensor> parents, BackwardFn backward_fn);

  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  // Matrix view: 1-D tensors are 1 x n.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double item() const;
  double at(std::size_t i) const { return node_->value.at(i); }
  double at(std::size_t r, std::size_t c) const { return node_->value.at(r * cols() + c); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();
  void clear_grad() { node_->grad.clear(); }

  // Detached deep copy (no graph, same requires_grad flag).
  Tensor clone() const;
  // Detached handle to the same values, never requiring grad.
  Tensor detach() const;

  // Reverse-mode pass from this scalar. Throws ContractError otherwise.
  void backward() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  detail::Node& node() const { return *node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

enum class Activation { Gelu, Relu };

// --- ops ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);
// a[m x n] + bias[n] broadcast over rows.
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor softmax_rows(const Tensor& x);
inline constexpr double kLayerNormEps = 1e-5;
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor activate(const Tensor& x, Activation act);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor row(const Tensor& x, std::size_t i);  // 1 x n
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
Tensor mean_rows(const Tensor& x);  // 1 x n
Tensor reshape(const Tensor& x, Shape shape);
Tensor sum(const Tensor& x);  // scalar
// Softmax cross-entropy of a logit vector against a class index.
Tensor cross_entropy(const Tensor& logits, std::size_t label);

}  // namespace ccmt
