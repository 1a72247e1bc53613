#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "membench/tensor.hpp"

namespace membench::nn {

// Probability floor applied inside every log of a probability.
inline constexpr double kProbFloor = 1e-12;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& grad_slot();
  void accumulate(const Tensor& g);
};

/// Handle to a node of the reverse-mode graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const;
  Tensor& mutable_value();
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  // Zero tensor of the value's shape when nothing has been accumulated yet.
  Tensor grad() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

  static Var from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

// While alive, ops record no graph (inference mode). Thread-local.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Reverse pass from a scalar. Gradients accumulate into every
// requires_grad leaf reachable from `loss`.
void backward(const Var& loss);

// Element-wise and shape ops.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double c);
Var square(const Var& x);
Var relu(const Var& x);
Var sum(const Var& x);
Var mean(const Var& x);
Var reshape(const Var& x, Shape shape);
Var flatten(const Var& x);                 // [n, ...] -> [n, prod(...)]
Var column(const Var& x, std::size_t col);  // [n, k] -> [n, 1]
Var concat_cols(const Var& a, const Var& b);

// Dense algebra.
Var matmul(const Var& a, const Var& b);     // [n, m] x [m, p]
Var add_bias(const Var& x, const Var& b);   // [n, m] + [m]
Var conv2d(const Var& x, const Var& weight, const Var& bias, std::size_t padding);

// Row-wise probability ops on [n, k] logits.
Var softmax(const Var& logits);
Var log_softmax(const Var& logits);
// Mean over rows of -sum_j target_ij * log p_ij with the probability floor.
Var soft_cross_entropy(const Var& logits, const Tensor& targets);
Var cross_entropy(const Var& logits, std::span<const int> labels);

// Biased (V-statistic) squared MMD between row sets with the Gaussian kernel
// k(u, v) = exp(-|u - v|^2 / (2 h^2)).
Var mmd_rbf(const Var& a, const Var& b, double bandwidth);

}  // namespace membench::nn
