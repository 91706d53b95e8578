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

#include "dpmob/numeric.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dpmob/errors.h"

namespace dpmob {

Tensor GaussianSample(const Shape& shape, double sigma, RngStream& rng) {
  if (!(sigma >= 0.0)) {
    throw InvalidArgument("gaussian sigma must be nonnegative, got " +
                          std::to_string(sigma));
  }
  Tensor out(shape);
  for (double& v : out.values()) v = rng.Normal() * sigma;
  return out;
}

double L2Norm(std::span<const double> values) {
  // Scaled accumulation keeps squares of large counts from overflowing.
  double scale = 0.0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double sum = 0.0;
  for (double v : values) {
    const double r = v / scale;
    sum += r * r;
  }
  return scale * std::sqrt(sum);
}

double L2Norm(const Tensor& t) { return L2Norm(t.values()); }

Tensor FiniteDiffGrad(const std::function<double(const Tensor&)>& f,
                      const Tensor& x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw InvalidArgument("non-finite function value at coordinate " +
                            std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double LogBinomial(std::int64_t n, std::int64_t k) {
  if (n < 0 || k < 0 || k > n) {
    throw InvalidArgument("log_binomial requires 0 <= k <= n, got n=" +
                          std::to_string(n) + " k=" + std::to_string(k));
  }
  k = std::min(k, n - k);
  if (k == 0) return 0.0;
  if (n <= 64) {
    double acc = 0.0;
    for (std::int64_t i = 1; i <= k; ++i) {
      acc += std::log(static_cast<double>(n - k + i)) -
             std::log(static_cast<double>(i));
    }
    return acc;
  }
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double LogSumExp(std::span<const double> xs) {
  if (xs.empty()) throw InvalidArgument("logsumexp of an empty list");
  const double m = *std::max_element(xs.begin(), xs.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - m);
  return m + std::log(sum);
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace dpmob
