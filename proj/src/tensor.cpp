#include "membench/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "membench/error.hpp"

namespace membench::nn {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto extent : shape_) {
    if (extent == 0) throw InvalidInput("tensor extents must be positive: " + shape_str(shape_));
  }
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto extent : shape_) {
    if (extent == 0) throw InvalidInput("tensor extents must be positive: " + shape_str(shape_));
  }
  if (data_.size() != shape_numel(shape_)) {
    throw InvalidInput("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_str(shape_));
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, std::vector<double>{value}); }

Tensor Tensor::from_vector(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("empty vector");
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw InvalidInput("item() on tensor with " + std::to_string(data_.size()) + " elements");
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw InvalidInput("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::rows(std::size_t begin, std::size_t end) const {
  if (rank() == 0 || begin >= end || end > shape_[0]) throw IndexError("row slice out of range");
  const std::size_t stride = data_.size() / shape_[0];
  Shape shape = shape_;
  shape[0] = end - begin;
  return Tensor(std::move(shape), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                                                      data_.begin() + static_cast<std::ptrdiff_t>(end * stride)));
}

Tensor Tensor::sample(std::size_t i) const {
  if (rank() < 2 || i >= shape_[0]) throw IndexError("sample index out of range");
  const std::size_t stride = data_.size() / shape_[0];
  Shape shape(shape_.begin() + 1, shape_.end());
  return Tensor(std::move(shape), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(i * stride),
                                                      data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride)));
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw InvalidInput("stack of zero tensors");
  const Shape& inner = items.front().shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<double> data;
  data.reserve(shape_numel(shape));
  for (const auto& t : items) {
    if (t.shape() != inner) {
      throw InvalidInput("stack shape mismatch: " + shape_str(t.shape()) + " vs " + shape_str(inner));
    }
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace membench::nn
