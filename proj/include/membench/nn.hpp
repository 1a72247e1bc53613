#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "membench/autograd.hpp"
#include "membench/rng.hpp"
#include "membench/tensor.hpp"

namespace membench::nn {

/// Probability vector over k classes.
using Posteriors = std::vector<double>;

// Numerically stable softmax of one logit vector.
Posteriors softmax(std::span<const double> logits);

// -ln(max(p[y], kProbFloor)).
double cross_entropy(std::span<const double> p, int y);

// Lowest index wins on ties.
int argmax(std::span<const double> values);

struct Param {
  std::string name;
  Var var;
};

// One gradient tensor per parameter, aligned with ParamSet order.
using GradSet = std::vector<Tensor>;

/// Named parameters. Each Var is a requires_grad leaf whose grad slot is the
/// parameter's gradient; copies of a ParamSet alias the same parameters.
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<Param> items) : items_(std::move(items)) {}

  std::size_t size() const { return items_.size(); }
  Param& operator[](std::size_t i) { return items_[i]; }
  const Param& operator[](std::size_t i) const { return items_[i]; }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  void zero_grad();
  GradSet grads() const;
  std::vector<Tensor> values() const;
  std::size_t numel() const;

 private:
  std::vector<Param> items_;
};

double grad_norm(const GradSet& grads);

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Var forward(const Var& x) const = 0;
  virtual std::vector<Param> params(const std::string& /*prefix*/) const { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, Rng& rng);
  Var forward(const Var& x) const override;
  std::vector<Param> params(const std::string& prefix) const override;
  std::unique_ptr<Layer> clone() const override;

 private:
  Dense() = default;
  Var weight_;  // [in, out]
  Var bias_;    // [out]
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t padding, Rng& rng);
  Var forward(const Var& x) const override;
  std::vector<Param> params(const std::string& prefix) const override;
  std::unique_ptr<Layer> clone() const override;

 private:
  Conv2d() = default;
  Var weight_;  // [out, in, k, k]
  Var bias_;    // [out]
  std::size_t padding_ = 0;
};

class Relu final : public Layer {
 public:
  Var forward(const Var& x) const override { return relu(x); }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(); }
};

class Flatten final : public Layer {
 public:
  Var forward(const Var& x) const override { return flatten(x); }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(); }
};

/// Sequential stack of layers. Copying deep-copies parameters.
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  void add(std::unique_ptr<Layer> layer);

  // x has a leading batch axis.
  Var forward(const Var& x) const;
  // Inference without recording a graph; returns [n, k] logits.
  Tensor logits(const Tensor& batch) const;

  ParamSet params() const;
  void zero_grad() const;
  void load_values(const std::vector<Tensor>& values);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace membench::nn
