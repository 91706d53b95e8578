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

#include "dpmob/tensor.h"

#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "dpmob/errors.h"

namespace dpmob {

std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)), values_(NumElements(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (NumElements(shape_) != values_.size()) {
    throw InvalidArgument("tensor shape holds " +
                          std::to_string(NumElements(shape_)) +
                          " elements but " + std::to_string(values_.size()) +
                          " values were given");
  }
}

Tensor Tensor::Vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::Filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.Fill(value);
  return t;
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t stride = values_.size() / shape_.at(0);
  return std::span<double>(values_).subspan(r * stride, stride);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t stride = values_.size() / shape_.at(0);
  return std::span<const double>(values_).subspan(r * stride, stride);
}

bool Tensor::AllFinite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::Fill(double value) { std::fill(values_.begin(), values_.end(), value); }

Tensor& Tensor::operator+=(const Tensor& other) {
  CheckSameShape(*this, other, "operator+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  CheckSameShape(*this, other, "operator-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

void Tensor::Axpy(double alpha, const Tensor& x) {
  CheckSameShape(*this, x, "Axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += alpha * x.values_[i];
}

namespace {

std::string ShapeString(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace

void CheckSameShape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch " +
                          ShapeString(a.shape()) + " vs " +
                          ShapeString(b.shape()));
  }
}

}  // namespace dpmob
