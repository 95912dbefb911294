#include "ccmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "ccmt/error.hpp"
#include "ccmt/random.hpp"

namespace ccmt {

namespace {

thread_local bool t_grad_enabled = true;

using detail::Node;

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() == 0 || t.ndim() > 2)
    throw DimensionError(std::string(op) + ": expected 1-D or 2-D tensor, got " +
                         shape_to_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
}

// c[m x n] += a[m x p] * b[p x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t p,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * p;
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = ai[k];
      const double* bk = b + k * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

// c[m x p] += g[m x n] * b[p x n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * p;
    for (std::size_t k = 0; k < p; ++k) {
      const double* bk = b + k * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += gi[j] * bk[j];
      ci[k] += s;
    }
  }
}

// c[p x n] += a[m x p]^T * g[m x n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t p,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * p;
    const double* gi = g + i * n;
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = ai[k];
      double* ck = c + k * n;
      for (std::size_t j = 0; j < n; ++j) ck[j] += aik * gi[j];
    }
  }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() noexcept { return t_grad_enabled; }

Tensor::Tensor() : node_(std::make_shared<Node>()) { node_->shape = {0}; }

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor shape must be positive: " + shape_to_string(shape));
  if (shape_numel(shape) != values.size())
    throw DimensionError("tensor shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::normal(Shape shape, double stddev, Rng& rng, bool requires_grad) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                       BackwardFn backward_fn) {
  Tensor out(std::move(shape), std::move(values));
  if (!t_grad_enabled) return out;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node_);
  out.node_->backward_fn = std::move(backward_fn);
  return out;
}

std::size_t Tensor::rows() const { return ndim() == 2 ? node_->shape[0] : 1; }
std::size_t Tensor::cols() const { return ndim() == 2 ? node_->shape[1] : node_->shape[0]; }

double Tensor::item() const {
  if (numel() != 1)
    throw ContractError("item(): tensor " + shape_to_string(shape()) + " is not a scalar");
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

Tensor Tensor::clone() const {
  Tensor t(node_->shape, node_->value, node_->requires_grad);
  return t;
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->value, false); }

void Tensor::backward() const {
  if (numel() != 1)
    throw ContractError("backward(): loss must be a scalar, got " + shape_to_string(shape()));
  if (!node_->requires_grad)
    throw ContractError("backward(): loss does not depend on any gradient-requiring tensor");

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    // Interior gradients are consumed; only leaves keep theirs.
    if (!n->parents.empty() && n != node_.get()) n->grad.clear();
  }
}

// --- ops ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.rows(), p = a.cols(), n = b.cols();
  if (b.rows() != p)
    throw DimensionError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, p, n);
  return Tensor::from_op({m, n}, std::move(out), {a, b}, [m, p, n](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    if (na.requires_grad)
      gemm_nt(self.grad.data(), nb.value.data(), na.grad_buffer().data(), m, n, p);
    if (nb.requires_grad)
      gemm_tn(na.value.data(), self.grad.data(), nb.grad_buffer().data(), m, p, n);
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto v = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
  return Tensor::from_op({n, m}, std::move(out), {a}, [m, n](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    if (na.requires_grad) {
      auto& g = na.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      auto& g = nb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& x : out) x *= s;
  return Tensor::from_op(a.shape(), std::move(out), {a}, [s](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  require_2d(a, "add_bias");
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.numel() != n)
    throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) +
                         " does not match width of " + shape_to_string(a.shape()));
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  return Tensor::from_op(a.shape(), std::move(out), {a, bias}, [m, n](Node& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_2d(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  const auto v = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = v.data() + i * n;
    double* yi = out.data() + i * n;
    const double mx = *std::max_element(xi, xi + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (yi[j] = std::exp(xi[j] - mx));
    const double inv = 1.0 / s;
    for (std::size_t j = 0; j < n; ++j) yi[j] *= inv;
  }
  return Tensor::from_op(x.shape(), std::move(out), {x}, [m, n](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      const double* yi = self.value.data() + i * n;
      const double* gy = self.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += gy[j] * yi[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += yi[j] * (gy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_2d(x, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.numel() != n || beta.numel() != n)
    throw DimensionError("layer_norm: affine parameters " + shape_to_string(gamma.shape()) +
                         "/" + shape_to_string(beta.shape()) + " do not match width of " +
                         shape_to_string(x.shape()));
  std::vector<double> xhat(m * n), inv_std(m), out(m * n);
  const auto v = x.values(), gv = gamma.values(), bv = beta.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = v.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xi[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xi[j] - mean) * inv_std[i];
      out[i * n + j] = gv[j] * xhat[i * n + j] + bv[j];
    }
  }
  return Tensor::from_op(
      x.shape(), std::move(out), {x, gamma, beta},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node& nx = *self.parents[0];
        Node& ng = *self.parents[1];
        Node& nb = *self.parents[2];
        if (ng.requires_grad) {
          auto& g = ng.grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j] * xhat[i * n + j];
        }
        if (nb.requires_grad) {
          auto& g = nb.grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
        }
        if (nx.requires_grad) {
          auto& g = nx.grad_buffer();
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_g = 0.0, mean_gx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double gj = self.grad[i * n + j] * ng.value[j];
              mean_g += gj;
              mean_gx += gj * xhat[i * n + j];
            }
            mean_g *= inv_n;
            mean_gx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double gj = self.grad[i * n + j] * ng.value[j];
              g[i * n + j] += inv_std[i] * (gj - mean_g - xhat[i * n + j] * mean_gx);
            }
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto v = x.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * v[i] * (1.0 + std::erf(v[i] * kInvSqrt2));
  return Tensor::from_op(x.shape(), std::move(out), {x}, [](Node& self) {
    Node& nx = *self.parents[0];
    auto& g = nx.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double xi = nx.value[i];
      const double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
      g[i] += self.grad[i] * (cdf + xi * pdf);
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto v = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return Tensor::from_op(x.shape(), std::move(out), {x}, [](Node& self) {
    Node& nx = *self.parents[0];
    auto& g = nx.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (nx.value[i] > 0.0) g[i] += self.grad[i];
  });
}

Tensor activate(const Tensor& x, Activation act) {
  return act == Activation::Gelu ? gelu(x) : relu(x);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.rows() != m)
      throw DimensionError("concat_cols: row count mismatch " + shape_to_string(parts[0].shape()) +
                           " vs " + shape_to_string(p.shape()));
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].values();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * total + off);
    off += widths[k];
  }
  return Tensor::from_op({m, total}, std::move(out), parts,
                         [m, total, widths = std::move(widths)](Node& self) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < widths.size(); ++k) {
                             Node& p = *self.parents[k];
                             if (p.requires_grad) {
                               auto& g = p.grad_buffer();
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < widths[k]; ++j)
                                   g[i * widths[k] + j] += self.grad[i * total + off + j];
                             }
                             off += widths[k];
                           }
                         });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<double> out;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    require_2d(p, "concat_rows");
    if (p.cols() != n)
      throw DimensionError("concat_rows: width mismatch " + shape_to_string(parts[0].shape()) +
                           " vs " + shape_to_string(p.shape()));
    m += p.rows();
    sizes.push_back(p.numel());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return Tensor::from_op({m, n}, std::move(out), parts, [sizes = std::move(sizes)](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      Node& p = *self.parents[k];
      if (p.requires_grad) {
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += self.grad[off + i];
      }
      off += sizes[k];
    }
  });
}

Tensor row(const Tensor& x, std::size_t i) {
  const std::size_t idx[] = {i};
  return gather_rows(x, idx);
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  require_2d(x, "gather_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (indices.empty()) throw DimensionError("gather_rows: no indices");
  std::vector<double> out(indices.size() * n);
  const auto v = x.values();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= m)
      throw DimensionError("gather_rows: row " + std::to_string(indices[r]) + " out of range for " +
                           shape_to_string(x.shape()));
    std::copy_n(v.data() + indices[r] * n, n, out.data() + r * n);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const std::size_t k = idx.size();
  return Tensor::from_op({k, n}, std::move(out), {x}, [n, idx = std::move(idx)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) g[idx[r] * n + j] += self.grad[r * n + j];
  });
}

Tensor mean_rows(const Tensor& x) {
  require_2d(x, "mean_rows");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(n, 0.0);
  const auto v = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += v[i * n + j];
  const double inv = 1.0 / static_cast<double>(m);
  for (auto& o : out) o *= inv;
  return Tensor::from_op({1, n}, std::move(out), {x}, [m, n, inv](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += inv * self.grad[j];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                         shape_to_string(shape));
  std::vector<double> out(x.values().begin(), x.values().end());
  return Tensor::from_op(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::from_op({1}, {s}, {x}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  const std::size_t c = logits.numel();
  if (label >= c)
    throw ValidationError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                          std::to_string(c) + " classes");
  const auto v = logits.values();
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  std::vector<double> prob(c);
  for (std::size_t j = 0; j < c; ++j) s += (prob[j] = std::exp(v[j] - mx));
  for (auto& p : prob) p /= s;
  const double loss = std::log(s) + mx - v[label];
  return Tensor::from_op({1}, {loss}, {logits}, [label, prob = std::move(prob)](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t j = 0; j < g.size(); ++j)
      g[j] += self.grad[0] * (prob[j] - (j == label ? 1.0 : 0.0));
  });
}

}  // namespace ccmt
