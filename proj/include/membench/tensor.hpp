#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace membench::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles. Value type; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor from_vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Unchecked 2-D accessors.
  double& at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }
  double at(std::size_t row, std::size_t col) const { return data_[row * shape_[1] + col]; }

  double item() const;
  Tensor reshaped(Shape shape) const;
  bool all_finite() const;
  void fill(double value);

  // Slice rows [begin, end) along axis 0.
  Tensor rows(std::size_t begin, std::size_t end) const;
  // Per-sample view: element i along axis 0 with the leading axis dropped.
  Tensor sample(std::size_t i) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Stack equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> items);

}  // namespace membench::nn
