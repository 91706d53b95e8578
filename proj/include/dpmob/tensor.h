// Copyright 2026 The dpmob Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPMOB_TENSOR_H_
#define DPMOB_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dpmob {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);

// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<double> values);

  static Tensor Zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor Vector(std::initializer_list<double> values);
  static Tensor Filled(Shape shape, double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // 2-D accessors; no bounds checks beyond the debug assertion.
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return values_[r * shape_[1] + c];
  }

  // Row `r` of a tensor of rank >= 2, as a contiguous view of the trailing
  // dimensions.
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  bool AllFinite() const;
  void Fill(double value);

  // Elementwise in-place arithmetic; shapes must match exactly.
  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double scale);
  void Axpy(double alpha, const Tensor& x);  // this += alpha * x

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
};

// Throws InvalidArgument when the shapes differ. `what` names the operand.
void CheckSameShape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace dpmob

#endif  // DPMOB_TENSOR_H_
