#include "membench/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "membench/error.hpp"

namespace membench::nn {

namespace {

thread_local bool g_grad_enabled = true;

const double kLogFloor = std::log(kProbFloor);

using BackwardFn = std::function<void(Node&)>;

Var make_op(const char* op, Tensor value, std::vector<Var> parents, BackwardFn fn) {
  if (!value.all_finite()) throw InvalidInput(std::string("non-finite value produced by ") + op);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    const bool any = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.node());
      node->backward_fn = std::move(fn);
    }
  }
  return Var::from_node(std::move(node));
}

void require_defined(const Var& v, const char* op) {
  if (!v.defined()) throw StateError(std::string(op) + ": undefined variable");
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw InvalidInput(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank(const Var& v, std::size_t rank, const char* op) {
  require_defined(v, op);
  if (v.value().rank() != rank) {
    throw InvalidInput(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                       shape_str(v.shape()));
  }
}

// Parent i of `self`, if it participates in the backward pass.
Node* grad_parent(Node& self, std::size_t i) {
  Node* p = self.parents[i].get();
  return p->requires_grad ? p : nullptr;
}

}  // namespace

Tensor& Node::grad_slot() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

void Node::accumulate(const Tensor& g) {
  auto& slot = grad_slot();
  auto dst = slot.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::from_node(std::shared_ptr<Node> node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

const Tensor& Var::value() const {
  if (!node_) throw StateError("access to undefined variable");
  return node_->value;
}

Tensor& Var::mutable_value() {
  if (!node_) throw StateError("access to undefined variable");
  return node_->value;
}

Tensor Var::grad() const {
  if (!node_) throw StateError("access to undefined variable");
  if (node_->grad.shape() != node_->value.shape()) return Tensor(node_->value.shape(), 0.0);
  return node_->grad;
}

void Var::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& loss) {
  if (!loss.defined()) throw StateError("backward on undefined variable");
  if (loss.value().numel() != 1) throw StateError("backward requires a scalar loss");
  const auto& root = loss.node();
  if (!root->requires_grad || !root->backward_fn) throw StateError("backward without a recorded forward pass");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior nodes start fresh; leaves keep accumulating until zero_grad.
  for (Node* n : order) {
    if (n->backward_fn) n->grad = Tensor(n->value.shape(), 0.0);
  }
  root->grad_slot()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return make_op("add", std::move(out), {a, b}, [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i)
      if (Node* p = grad_parent(self, i)) p->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  return make_op("sub", std::move(out), {a, b}, [](Node& self) {
    if (Node* p = grad_parent(self, 0)) p->accumulate(self.grad);
    if (Node* p = grad_parent(self, 1)) {
      auto& slot = p->grad_slot();
      for (std::size_t i = 0; i < slot.numel(); ++i) slot[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  auto bd = b.value().data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  return make_op("mul", std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (Node* p = grad_parent(self, 0)) {
      auto& slot = p->grad_slot();
      for (std::size_t i = 0; i < slot.numel(); ++i) slot[i] += self.grad[i] * bv[i];
    }
    if (Node* p = grad_parent(self, 1)) {
      auto& slot = p->grad_slot();
      for (std::size_t i = 0; i < slot.numel(); ++i) slot[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& x, double factor) {
  require_defined(x, "scale");
  Tensor out = x.value();
  for (auto& v : out.data()) v *= factor;
  return make_op("scale", std::move(out), {x}, [factor](Node& self) {
    auto& slot = self.parents[0]->grad_slot();
    for (std::size_t i = 0; i < slot.numel(); ++i) slot[i] += factor * self.grad[i];
  });
}

Var add_scalar(const Var& x, double c) {
  require_defined(x, "add_scalar");
  Tensor out = x.value();
  for (auto& v : out.data()) v += c;
  return make_op("add_scalar", std::move(out), {x}, [](Node& self) { self.parents[0]->accumulate(self.grad); });
}

Var square(const Var& x) {
  require_defined(x, "square");
  Tensor out = x.value();
  for (auto& v : out.data()) v *= v;
  return make_op("square", std::move(out), {x}, [](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    auto& slot = self.parents[0]->grad_slot();
    for (std::size_t i = 0; i < slot.numel(); ++i) slot[i] += 2.0 * xv[i] * self.grad[i];
  });
}

Var relu(const Var& x) {
  require_defined(x, "relu");
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return make_op("relu", std::move(out), {x}, [](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    auto& slot = self.parents[0]->grad_slot();
    for (std::size_t i = 0; i < slot.numel(); ++i)
      if (xv[i] > 0.0) slot[i] += self.grad[i];
  });
}

Var sum(const Var& x) {
  require_defined(x, "sum");
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return make_op("sum", Tensor::scalar(total), {x}, [](Node& self) {
    auto& slot = self.parents[0]->grad_slot();
    const double g = self.grad[0];
    for (auto& v : slot.data()) v += g;
  });
}

Var mean(const Var& x) {
  require_defined(x, "mean");
  return scale(sum(x), 1.0 / static_cast<double>(x.value().numel()));
}

Var reshape(const Var& x, Shape shape) {
  require_defined(x, "reshape");
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op("reshape", std::move(out), {x}, [](Node& self) {
    auto& slot = self.parents[0]->grad_slot();
    for (std::size_t i = 0; i < slot.numel(); ++i) slot[i] += self.grad[i];
  });
}

Var flatten(const Var& x) {
  require_defined(x, "flatten");
  const auto& s = x.shape();
  if (s.size() < 2) throw InvalidInput("flatten: expected a batch of samples, got " + shape_str(s));
  if (s.size() == 2) return x;
  return reshape(x, Shape{s[0], x.value().numel() / s[0]});
}

Var column(const Var& x, std::size_t col) {
  require_rank(x, 2, "column");
  const std::size_t n = x.shape()[0];
  const std::size_t k = x.shape()[1];
  if (col >= k) throw IndexError("column " + std::to_string(col) + " out of range for " + shape_str(x.shape()));
  Tensor out(Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) out[i] = x.value().at(i, col);
  return make_op("column", std::move(out), {x}, [n, col](Node& self) {
    auto& slot = self.parents[0]->grad_slot();
    for (std::size_t i = 0; i < n; ++i) slot.at(i, col) += self.grad[i];
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  const std::size_t n = a.shape()[0];
  if (b.shape()[0] != n) throw InvalidInput("concat_cols: row count mismatch");
  const std::size_t ka = a.shape()[1];
  const std::size_t kb = b.shape()[1];
  Tensor out(Shape{n, ka + kb});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < ka; ++j) out.at(i, j) = a.value().at(i, j);
    for (std::size_t j = 0; j < kb; ++j) out.at(i, ka + j) = b.value().at(i, j);
  }
  return make_op("concat_cols", std::move(out), {a, b}, [n, ka, kb](Node& self) {
    if (Node* p = grad_parent(self, 0)) {
      auto& slot = p->grad_slot();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < ka; ++j) slot.at(i, j) += self.grad.at(i, j);
    }
    if (Node* p = grad_parent(self, 1)) {
      auto& slot = p->grad_slot();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < kb; ++j) slot.at(i, j) += self.grad.at(i, ka + j);
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t n = a.shape()[0];
  const std::size_t m = a.shape()[1];
  const std::size_t p = b.shape()[1];
  if (b.shape()[0] != m) {
    throw InvalidInput("matmul: inner dimension mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor out(Shape{n, p}, 0.0);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = av.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = &bv.data()[k * p];
      double* orow = &out.data()[i * p];
      for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
    }
  }
  return make_op("matmul", std::move(out), {a, b}, [n, m, p](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    const Tensor& g = self.grad;
    if (Node* pa = grad_parent(self, 0)) {
      auto& slot = pa->grad_slot();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < p; ++j) acc += g.at(i, j) * bv.at(k, j);
          slot.at(i, k) += acc;
        }
    }
    if (Node* pb = grad_parent(self, 1)) {
      auto& slot = pb->grad_slot();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) {
          const double aik = av.at(i, k);
          if (aik == 0.0) continue;
          for (std::size_t j = 0; j < p; ++j) slot.at(k, j) += aik * g.at(i, j);
        }
    }
  });
}

Var add_bias(const Var& x, const Var& b) {
  require_rank(x, 2, "add_bias");
  require_rank(b, 1, "add_bias");
  const std::size_t n = x.shape()[0];
  const std::size_t m = x.shape()[1];
  if (b.shape()[0] != m) throw InvalidInput("add_bias: bias length mismatch");
  Tensor out = x.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) += b.value()[j];
  return make_op("add_bias", std::move(out), {x, b}, [n, m](Node& self) {
    if (Node* p = grad_parent(self, 0)) p->accumulate(self.grad);
    if (Node* p = grad_parent(self, 1)) {
      auto& slot = p->grad_slot();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) slot[j] += self.grad.at(i, j);
    }
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, std::size_t padding) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d");
  require_rank(bias, 1, "conv2d");
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  const std::size_t n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const std::size_t o = ws[0], kh = ws[2], kw = ws[3];
  if (ws[1] != c) throw InvalidInput("conv2d: channel mismatch");
  if (bias.shape()[0] != o) throw InvalidInput("conv2d: bias length mismatch");
  if (h + 2 * padding < kh || w + 2 * padding < kw) throw InvalidInput("conv2d: kernel larger than padded input");
  const std::size_t oh = h + 2 * padding - kh + 1;
  const std::size_t ow = w + 2 * padding - kw + 1;
  const auto pad = static_cast<std::ptrdiff_t>(padding);

  // Visits every (output, input, weight) index triple of the direct convolution.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t oc = 0; oc < o; ++oc)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xo = 0; xo < ow; ++xo) {
            const std::size_t out_idx = ((b * o + oc) * oh + y) * ow + xo;
            for (std::size_t ic = 0; ic < c; ++ic)
              for (std::size_t ky = 0; ky < kh; ++ky) {
                const auto iy = static_cast<std::ptrdiff_t>(y + ky) - pad;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  const auto ix = static_cast<std::ptrdiff_t>(xo + kx) - pad;
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                  const std::size_t in_idx = ((b * c + ic) * h + static_cast<std::size_t>(iy)) * w +
                                             static_cast<std::size_t>(ix);
                  const std::size_t w_idx = ((oc * c + ic) * kh + ky) * kw + kx;
                  fn(out_idx, in_idx, w_idx);
                }
              }
          }
  };

  Tensor out(Shape{n, o, oh, ow}, 0.0);
  const auto& xv = x.value();
  const auto& wv = weight.value();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t i = 0; i < oh * ow; ++i) out[(b * o + oc) * oh * ow + i] = bias.value()[oc];
  for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) { out[oi] += xv[ii] * wv[wi]; });

  return make_op("conv2d", std::move(out), {x, weight, bias}, [=](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    const Tensor& g = self.grad;
    Node* px = grad_parent(self, 0);
    Node* pw = grad_parent(self, 1);
    Node* pb = grad_parent(self, 2);
    if (px || pw) {
      Tensor* gx = px ? &px->grad_slot() : nullptr;
      Tensor* gw = pw ? &pw->grad_slot() : nullptr;
      for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) {
        if (gx) (*gx)[ii] += g[oi] * wv[wi];
        if (gw) (*gw)[wi] += g[oi] * xv[ii];
      });
    }
    if (pb) {
      auto& slot = pb->grad_slot();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t oc = 0; oc < o; ++oc)
          for (std::size_t i = 0; i < oh * ow; ++i) slot[oc] += g[(b * o + oc) * oh * ow + i];
    }
  });
}

namespace {

Tensor row_log_softmax(const Tensor& logits) {
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits.at(i, j) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) out.at(i, j) = logits.at(i, j) - lse;
  }
  return out;
}

}  // namespace

Var softmax(const Var& logits) {
  require_rank(logits, 2, "softmax");
  Tensor out = row_log_softmax(logits.value());
  for (auto& v : out.data()) v = std::exp(v);
  const std::size_t n = out.dim(0);
  const std::size_t k = out.dim(1);
  return make_op("softmax", std::move(out), {logits}, [n, k](Node& self) {
    const Tensor& y = self.value;
    auto& slot = self.parents[0]->grad_slot();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += self.grad.at(i, j) * y.at(i, j);
      for (std::size_t j = 0; j < k; ++j) slot.at(i, j) += y.at(i, j) * (self.grad.at(i, j) - dot);
    }
  });
}

Var log_softmax(const Var& logits) {
  require_rank(logits, 2, "log_softmax");
  Tensor out = row_log_softmax(logits.value());
  const std::size_t n = out.dim(0);
  const std::size_t k = out.dim(1);
  return make_op("log_softmax", std::move(out), {logits}, [n, k](Node& self) {
    auto& slot = self.parents[0]->grad_slot();
    for (std::size_t i = 0; i < n; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < k; ++j) gsum += self.grad.at(i, j);
      for (std::size_t j = 0; j < k; ++j) slot.at(i, j) += self.grad.at(i, j) - std::exp(self.value.at(i, j)) * gsum;
    }
  });
}

Var soft_cross_entropy(const Var& logits, const Tensor& targets) {
  require_rank(logits, 2, "soft_cross_entropy");
  if (targets.shape() != logits.shape()) {
    throw InvalidInput("soft_cross_entropy: targets " + shape_str(targets.shape()) + " vs logits " +
                       shape_str(logits.shape()));
  }
  const std::size_t n = logits.shape()[0];
  const std::size_t k = logits.shape()[1];
  Tensor logp = row_log_softmax(logits.value());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) loss -= targets.at(i, j) * std::max(logp.at(i, j), kLogFloor);
  loss /= static_cast<double>(n);
  return make_op("soft_cross_entropy", Tensor::scalar(loss), {logits},
                 [n, k, targets, logp = std::move(logp)](Node& self) {
                   auto& slot = self.parents[0]->grad_slot();
                   const double g = self.grad[0] / static_cast<double>(n);
                   for (std::size_t i = 0; i < n; ++i) {
                     double active_mass = 0.0;
                     for (std::size_t j = 0; j < k; ++j)
                       if (logp.at(i, j) >= kLogFloor) active_mass += targets.at(i, j);
                     for (std::size_t j = 0; j < k; ++j) {
                       const double own = logp.at(i, j) >= kLogFloor ? targets.at(i, j) : 0.0;
                       slot.at(i, j) += g * (std::exp(logp.at(i, j)) * active_mass - own);
                     }
                   }
                 });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.shape()[0];
  const std::size_t k = logits.shape()[1];
  if (labels.size() != n) throw InvalidInput("cross_entropy: label count mismatch");
  Tensor targets(Shape{n, k}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw IndexError("cross_entropy: label " + std::to_string(labels[i]) + " out of range");
    }
    targets.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return soft_cross_entropy(logits, targets);
}

Var mmd_rbf(const Var& a, const Var& b, double bandwidth) {
  require_rank(a, 2, "mmd_rbf");
  require_rank(b, 2, "mmd_rbf");
  if (a.shape()[1] != b.shape()[1]) throw InvalidInput("mmd_rbf: feature dimension mismatch");
  if (!(bandwidth > 0.0)) throw InvalidInput("mmd_rbf: bandwidth must be positive");
  const std::size_t n = a.shape()[0];
  const std::size_t m = b.shape()[0];
  const std::size_t d = a.shape()[1];
  const double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);

  auto kernel = [=](const Tensor& u, std::size_t i, const Tensor& v, std::size_t j) {
    double dist2 = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = u.at(i, t) - v.at(j, t);
      dist2 += diff * diff;
    }
    return std::exp(-dist2 * inv2h2);
  };

  const auto& av = a.value();
  const auto& bv = b.value();
  double kaa = 0.0, kbb = 0.0, kab = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) kaa += kernel(av, i, av, j);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) kbb += kernel(bv, i, bv, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) kab += kernel(av, i, bv, j);
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  const double value = kaa / (nn * nn) + kbb / (mm * mm) - 2.0 * kab / (nn * mm);

  return make_op("mmd_rbf", Tensor::scalar(value), {a, b}, [=](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    const double g = self.grad[0];
    const double inv_h2 = 2.0 * inv2h2;
    // d k(u, v) / du = -k(u, v) (u - v) / h^2
    auto accumulate_pair = [&](Tensor& slot, const Tensor& u, std::size_t i, const Tensor& v, std::size_t j,
                               double coeff) {
      const double kv = kernel(u, i, v, j);
      for (std::size_t t = 0; t < d; ++t) slot.at(i, t) += coeff * kv * -(u.at(i, t) - v.at(j, t)) * inv_h2;
    };
    if (Node* pa = grad_parent(self, 0)) {
      auto& slot = pa->grad_slot();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) accumulate_pair(slot, av, i, av, j, g * 2.0 / (nn * nn));
        for (std::size_t j = 0; j < m; ++j) accumulate_pair(slot, av, i, bv, j, -g * 2.0 / (nn * mm));
      }
    }
    if (Node* pb = grad_parent(self, 1)) {
      auto& slot = pb->grad_slot();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) accumulate_pair(slot, bv, i, bv, j, g * 2.0 / (mm * mm));
        for (std::size_t j = 0; j < n; ++j) accumulate_pair(slot, bv, i, av, j, -g * 2.0 / (nn * mm));
      }
    }
  });
}

}  // namespace membench::nn
