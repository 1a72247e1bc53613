#include "membench/nn.hpp"

#include <algorithm>
#include <cmath>

#include "membench/error.hpp"

namespace membench::nn {

Posteriors softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax of empty vector");
  for (double v : logits) {
    if (!std::isfinite(v)) throw InvalidInput("softmax: non-finite logit");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  Posteriors out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

double cross_entropy(std::span<const double> p, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= p.size()) {
    throw IndexError("class index " + std::to_string(y) + " out of range for k=" + std::to_string(p.size()));
  }
  return -std::log(std::max(p[static_cast<std::size_t>(y)], kProbFloor));
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return static_cast<int>(best);
}

void ParamSet::zero_grad() {
  for (auto& p : items_) p.var.zero_grad();
}

GradSet ParamSet::grads() const {
  GradSet out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.var.grad());
  return out;
}

std::vector<Tensor> ParamSet::values() const {
  std::vector<Tensor> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.var.value());
  return out;
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.var.value().numel();
  return n;
}

double grad_norm(const GradSet& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.data()) sq += v * v;
  return std::sqrt(sq);
}

namespace {

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

Dense::Dense(std::size_t in, std::size_t out, Rng& rng)
    : weight_(he_uniform(Shape{in, out}, in, rng), true), bias_(Tensor(Shape{out}, 0.0), true) {}

Var Dense::forward(const Var& x) const { return add_bias(matmul(x, weight_), bias_); }

std::vector<Param> Dense::params(const std::string& prefix) const {
  return {{prefix + "weight", weight_}, {prefix + "bias", bias_}};
}

std::unique_ptr<Layer> Dense::clone() const {
  auto copy = std::unique_ptr<Dense>(new Dense());
  copy->weight_ = Var(weight_.value(), true);
  copy->bias_ = Var(bias_.value(), true);
  return copy;
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t padding, Rng& rng)
    : weight_(he_uniform(Shape{out_channels, in_channels, kernel, kernel}, in_channels * kernel * kernel, rng), true),
      bias_(Tensor(Shape{out_channels}, 0.0), true),
      padding_(padding) {}

Var Conv2d::forward(const Var& x) const { return conv2d(x, weight_, bias_, padding_); }

std::vector<Param> Conv2d::params(const std::string& prefix) const {
  return {{prefix + "weight", weight_}, {prefix + "bias", bias_}};
}

std::unique_ptr<Layer> Conv2d::clone() const {
  auto copy = std::unique_ptr<Conv2d>(new Conv2d());
  copy->weight_ = Var(weight_.value(), true);
  copy->bias_ = Var(bias_.value(), true);
  copy->padding_ = padding_;
  return copy;
}

Network::Network(const Network& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Network::add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

Var Network::forward(const Var& x) const {
  Var h = x;
  for (const auto& l : layers_) h = l->forward(h);
  return h;
}

Tensor Network::logits(const Tensor& batch) const {
  NoGradGuard guard;
  return forward(Var(batch)).value();
}

ParamSet Network::params() const {
  std::vector<Param> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto ps = layers_[i]->params(std::to_string(i) + ".");
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return ParamSet(std::move(out));
}

void Network::zero_grad() const { params().zero_grad(); }

void Network::load_values(const std::vector<Tensor>& values) {
  auto ps = params();
  if (values.size() != ps.size()) {
    throw InvalidInput("parameter count mismatch: expected " + std::to_string(ps.size()) + ", got " +
                       std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (values[i].shape() != ps[i].var.shape()) {
      throw InvalidInput("parameter " + ps[i].name + " shape mismatch: " + shape_str(values[i].shape()) + " vs " +
                         shape_str(ps[i].var.shape()));
    }
    ps[i].var.mutable_value() = values[i];
  }
}

}  // namespace membench::nn
