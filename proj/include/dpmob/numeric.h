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

#ifndef DPMOB_NUMERIC_H_
#define DPMOB_NUMERIC_H_

#include <cstdint>
#include <functional>
#include <span>

#include "dpmob/rng.h"
#include "dpmob/tensor.h"

namespace dpmob {

// I.i.d. N(0, sigma^2) entries. sigma == 0 yields an all-zero tensor.
Tensor GaussianSample(const Shape& shape, double sigma, RngStream& rng);

double L2Norm(const Tensor& t);
double L2Norm(std::span<const double> values);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
// Throws InvalidArgument if f returns a non-finite value.
Tensor FiniteDiffGrad(const std::function<double(const Tensor&)>& f,
                      const Tensor& x, double h);

// ln C(n, k). Exact summation of logs for n <= 64, lgamma beyond.
double LogBinomial(std::int64_t n, std::int64_t k);

// ln(sum_i exp(xs_i)), shifted by the max term.
double LogSumExp(std::span<const double> xs);

double Sigmoid(double x);

}  // namespace dpmob

#endif  // DPMOB_NUMERIC_H_
