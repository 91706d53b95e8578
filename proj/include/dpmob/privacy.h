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

#ifndef DPMOB_PRIVACY_H_
#define DPMOB_PRIVACY_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dpmob/data.h"
#include "dpmob/rng.h"

namespace dpmob {

struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;
  double l2_sensitivity = 1.0;
};

// sigma = (l2_sensitivity / epsilon) * sqrt(2 ln(1.25 / delta)).
// Throws OutOfValidity unless epsilon is in (0, 1); InvalidArgument for delta
// outside (0, 1) or non-positive sensitivity.
double GaussianSigma(double l2_sensitivity, double epsilon, double delta);

struct SanitizeOptions {
  // Post-processing clamp of noisy counts to >= 0, for publication output.
  bool clamp_nonnegative = false;
};

// Adds independent N(0, sigma^2) noise to every count of every slot. Noise is
// drawn in row-major (slot, region) order, so it depends only on the RNG
// stream and the series shape.
MobilitySeries SanitizeSeries(const MobilitySeries& s, const PrivacyParams& p,
                              RngStream& rng, SanitizeOptions options = {});

// Per-step Renyi DP at integer order alpha of the Poisson-subsampled Gaussian
// mechanism with sampling rate q and noise multiplier sigma:
//   (1/(alpha-1)) ln sum_k C(alpha,k) (1-q)^(alpha-k) q^k exp(k(k-1)/(2 sigma^2)).
double RdpSubsampledGaussian(double q, double noise_multiplier, int alpha);

// {2, ..., 64} U {128, 256, 512}.
std::vector<int> DefaultRdpOrders();

struct EpsilonResult {
  double epsilon = 0.0;
  int order = 0;
};

// min over alpha of steps * rdp(alpha) + ln(1/delta) / (alpha - 1).
EpsilonResult ComputeEpsilon(double q, double noise_multiplier, std::int64_t steps,
                             double delta, std::span<const int> orders);
inline EpsilonResult ComputeEpsilon(double q, double noise_multiplier,
                                    std::int64_t steps, double delta) {
  const auto orders = DefaultRdpOrders();
  return ComputeEpsilon(q, noise_multiplier, steps, delta, orders);
}

// Sequential composition of (epsilon, delta) releases.
class BudgetLedger {
 public:
  struct Entry {
    std::string label;
    double epsilon = 0.0;
    double delta = 0.0;
  };
  struct Totals {
    double epsilon = 0.0;
    double delta = 0.0;
  };

  BudgetLedger() = default;
  explicit BudgetLedger(std::int64_t n_population) : n_population_(n_population) {}

  void Append(std::string label, double epsilon, double delta);
  // `count` identical releases, labelled "<prefix><i>".
  void AppendRepeated(const std::string& prefix, std::int64_t count, double epsilon,
                      double delta);

  const std::vector<Entry>& entries() const { return entries_; }
  std::int64_t n_population() const { return n_population_; }
  Totals Total() const;

  // label,epsilon,delta,cumulative_epsilon,cumulative_delta
  void WriteCsv(std::ostream& out) const;

 private:
  std::vector<Entry> entries_;
  std::int64_t n_population_ = 0;
};

// True iff the n releases' total delta stays below 1/n, i.e. n * delta < 1/n.
bool DeltaBudgetCheck(double delta, std::int64_t n);

}  // namespace dpmob

#endif  // DPMOB_PRIVACY_H_
