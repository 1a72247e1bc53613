#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "membench/nn.hpp"

namespace membench::nn {

struct TrainRecipe {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  // Throws ConfigError. Zero epochs is accepted and means "initialize only".
  void validate() const;
};

// lr0 * (1 + cos(pi * epoch / total)) / 2, stepped once per epoch.
double cosine_lr(std::size_t epoch, std::size_t total, double lr0);

/// Momentum SGD: v <- momentum * v + g; w <- w - lr * v.
class Sgd {
 public:
  explicit Sgd(double momentum = 0.9, double weight_decay = 0.0);

  // Consumes the gradients stored on the parameters and zeroes them.
  void step(ParamSet& params, double lr);
  // Applies an externally computed gradient (e.g. privatized); parameter
  // gradient slots are zeroed as well.
  void step(ParamSet& params, const GradSet& grads, double lr);

  const std::vector<Tensor>& velocity() const { return velocity_; }

 private:
  double momentum_;
  double weight_decay_;
  std::vector<Tensor> velocity_;
};

// Free-function form of one momentum SGD update with caller-owned velocity.
void sgd_step(ParamSet& params, std::vector<Tensor>& velocity, double lr, double momentum);

// Mean cross-entropy gradient over the batch (parameters' grad slots are
// left zeroed on return).
GradSet batch_grads(const Network& net, const Tensor& inputs, const Tensor& targets);
GradSet batch_grads(const Network& net, const Tensor& inputs, std::span<const int> labels);

// One gradient per sample; their mean equals batch_grads on the same batch.
std::vector<GradSet> per_sample_grads(const Network& net, const Tensor& inputs, const Tensor& targets);
std::vector<GradSet> per_sample_grads(const Network& net, const Tensor& inputs, std::span<const int> labels);

Tensor one_hot(std::span<const int> labels, std::size_t k);

}  // namespace membench::nn
