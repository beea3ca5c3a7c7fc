#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace advdiff {

// Dense row-major tensor of 64-bit reals. Rank 1 (vectors) and rank 2
// (matrices) cover everything in this project.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor vec(std::initializer_list<double> values);
  static Tensor vec(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);
  static Tensor from_data(std::vector<std::size_t> shape,
                          std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // rank-1 tensors count as a single row
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  std::string shape_str() const;

  Tensor reshaped(std::vector<std::size_t> shape) const;
  Tensor row(std::size_t r) const;  // copy of row r as a rank-1 tensor

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double k, const Tensor& a);
Tensor operator*(const Tensor& a, double k);

Tensor hadamard(const Tensor& a, const Tensor& b);
// k*x + y
Tensor axpy(double k, const Tensor& x, const Tensor& y);
double dot(const Tensor& a, const Tensor& b);
double squared_norm(const Tensor& a);
double norm(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);

void require_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace advdiff
