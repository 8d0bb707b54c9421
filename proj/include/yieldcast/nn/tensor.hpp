#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "yieldcast/util.hpp"

namespace yieldcast::nn {

// Dense row-major tensor of doubles, rank 1..3 in practice.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), values_(count(shape_), 0.0) {}
  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != count(shape_)) {
      throw Error("tensor value count " + std::to_string(values_.size()) +
                  " does not match shape " + shape_string());
    }
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return values_.size(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double at2(std::size_t i, std::size_t j) const {
    return values_[i * shape_[1] + j];
  }
  double& at2(std::size_t i, std::size_t j) {
    return values_[i * shape_[1] + j];
  }
  double at3(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& at3(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(double v) { values_.assign(values_.size(), v); }
  void zero() { fill(0.0); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string shape_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i > 0) s += ", ";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (const std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

}  // namespace yieldcast::nn
