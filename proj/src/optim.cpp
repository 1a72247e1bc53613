#include "membench/optim.hpp"

#include <cmath>
#include <numbers>

#include "membench/error.hpp"

namespace membench::nn {

void TrainRecipe::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

double cosine_lr(std::size_t epoch, std::size_t total, double lr0) {
  if (total < 1) throw InvalidInput("cosine_lr: total must be >= 1");
  if (epoch > total) throw InvalidInput("cosine_lr: epoch exceeds total");
  const double frac = static_cast<double>(epoch) / static_cast<double>(total);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

Sgd::Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidInput("momentum must be in [0, 1)");
}

void Sgd::step(ParamSet& params, double lr) { step(params, params.grads(), lr); }

void Sgd::step(ParamSet& params, const GradSet& grads, double lr) {
  if (!(lr > 0.0)) throw InvalidInput("sgd: learning rate must be > 0");
  if (grads.size() != params.size()) throw InvalidInput("sgd: gradient count mismatch");
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const auto& p : params) velocity_.emplace_back(p.var.shape(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].var.mutable_value().data();
    auto v = velocity_[i].data();
    auto g = grads[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = momentum_ * v[j] + g[j] + weight_decay_ * w[j];
      w[j] -= lr * v[j];
    }
  }
  params.zero_grad();
}

void sgd_step(ParamSet& params, std::vector<Tensor>& velocity, double lr, double momentum) {
  if (!(lr > 0.0)) throw InvalidInput("sgd: learning rate must be > 0");
  if (velocity.size() != params.size()) {
    velocity.clear();
    for (const auto& p : params) velocity.emplace_back(p.var.shape(), 0.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor g = params[i].var.grad();
    auto w = params[i].var.mutable_value().data();
    auto v = velocity[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = momentum * v[j] + g[j];
      w[j] -= lr * v[j];
    }
  }
  params.zero_grad();
}

Tensor one_hot(std::span<const int> labels, std::size_t k) {
  if (labels.empty()) throw InvalidInput("one_hot: empty label list");
  Tensor t(Shape{labels.size(), k}, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw IndexError("label " + std::to_string(labels[i]) + " out of range for k=" + std::to_string(k));
    }
    t.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return t;
}

GradSet batch_grads(const Network& net, const Tensor& inputs, const Tensor& targets) {
  auto params = net.params();
  params.zero_grad();
  backward(soft_cross_entropy(net.forward(Var(inputs)), targets));
  GradSet g = params.grads();
  params.zero_grad();
  return g;
}

GradSet batch_grads(const Network& net, const Tensor& inputs, std::span<const int> labels) {
  const Tensor probe = net.logits(inputs.rows(0, 1));
  return batch_grads(net, inputs, one_hot(labels, probe.dim(1)));
}

std::vector<GradSet> per_sample_grads(const Network& net, const Tensor& inputs, const Tensor& targets) {
  if (inputs.rank() == 0 || inputs.dim(0) == 0) throw InvalidInput("per_sample_grads: empty batch");
  if (targets.rank() != 2 || targets.dim(0) != inputs.dim(0)) {
    throw InvalidInput("per_sample_grads: targets do not match batch");
  }
  std::vector<GradSet> out;
  out.reserve(inputs.dim(0));
  for (std::size_t i = 0; i < inputs.dim(0); ++i) {
    out.push_back(batch_grads(net, inputs.rows(i, i + 1), targets.rows(i, i + 1)));
  }
  return out;
}

std::vector<GradSet> per_sample_grads(const Network& net, const Tensor& inputs, std::span<const int> labels) {
  if (inputs.rank() == 0 || labels.empty()) throw InvalidInput("per_sample_grads: empty batch");
  const Tensor probe = net.logits(inputs.rows(0, 1));
  return per_sample_grads(net, inputs, one_hot(labels, probe.dim(1)));
}

}  // namespace membench::nn
