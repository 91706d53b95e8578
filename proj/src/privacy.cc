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

#include "dpmob/privacy.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "dpmob/errors.h"
#include "dpmob/numeric.h"

namespace dpmob {

double GaussianSigma(double l2_sensitivity, double epsilon, double delta) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw OutOfValidity(fmt::format(
        "Gaussian mechanism requires epsilon in (0, 1) for its (epsilon, delta) "
        "guarantee; got epsilon={}",
        epsilon));
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument(fmt::format("delta must be in (0, 1), got {}", delta));
  }
  if (!(l2_sensitivity > 0.0)) {
    throw InvalidArgument(fmt::format("l2 sensitivity must be positive, got {}", l2_sensitivity));
  }
  return l2_sensitivity / epsilon * std::sqrt(2.0 * std::log(1.25 / delta));
}

MobilitySeries SanitizeSeries(const MobilitySeries& s, const PrivacyParams& p,
                              RngStream& rng, SanitizeOptions options) {
  const double sigma = GaussianSigma(p.l2_sensitivity, p.epsilon, p.delta);
  if (s.HasGaps()) throw InvalidArgument("sanitize expects a gap-free series");
  Tensor noisy = s.counts();
  for (double& v : noisy.values()) {
    v += rng.Normal() * sigma;
    if (options.clamp_nonnegative && v < 0.0) v = 0.0;
  }
  PrivacyRecord record{"gaussian", p.epsilon, p.delta, p.l2_sensitivity, sigma,
                       options.clamp_nonnegative};
  return MobilitySeries::MakeSanitized(s, std::move(noisy), std::move(record));
}

double RdpSubsampledGaussian(double q, double noise_multiplier, int alpha) {
  if (alpha < 2) throw InvalidArgument("RDP order must be an integer >= 2");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("sampling rate must be in [0, 1]");
  if (!(noise_multiplier > 0.0)) throw InvalidArgument("noise multiplier must be positive");
  if (q == 0.0) return 0.0;
  const double inv_two_sigma2 = 1.0 / (2.0 * noise_multiplier * noise_multiplier);
  if (q == 1.0) return static_cast<double>(alpha) * inv_two_sigma2;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  std::vector<double> terms(static_cast<std::size_t>(alpha) + 1);
  for (int k = 0; k <= alpha; ++k) {
    terms[k] = LogBinomial(alpha, k) + (alpha - k) * log_1mq + k * log_q +
               static_cast<double>(k) * (k - 1) * inv_two_sigma2;
  }
  return std::max(0.0, LogSumExp(terms) / (alpha - 1));
}

std::vector<int> DefaultRdpOrders() {
  std::vector<int> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  orders.insert(orders.end(), {128, 256, 512});
  return orders;
}

EpsilonResult ComputeEpsilon(double q, double noise_multiplier, std::int64_t steps,
                             double delta, std::span<const int> orders) {
  if (orders.empty()) throw InvalidArgument("at least one RDP order is required");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument(fmt::format("delta must be in (0, 1), got {}", delta));
  }
  if (steps < 0) throw InvalidArgument("steps must be nonnegative");
  EpsilonResult best{std::numeric_limits<double>::infinity(), 0};
  const double log_inv_delta = -std::log(delta);
  for (int alpha : orders) {
    const double rdp =
        steps == 0 ? 0.0 : static_cast<double>(steps) * RdpSubsampledGaussian(q, noise_multiplier, alpha);
    const double eps = rdp + log_inv_delta / (alpha - 1);
    if (eps < best.epsilon) best = {eps, alpha};
  }
  return best;
}

void BudgetLedger::Append(std::string label, double epsilon, double delta) {
  if (!(epsilon >= 0.0) || !(delta >= 0.0)) {
    throw InvalidArgument("ledger entries need nonnegative epsilon and delta");
  }
  entries_.push_back({std::move(label), epsilon, delta});
}

void BudgetLedger::AppendRepeated(const std::string& prefix, std::int64_t count,
                                  double epsilon, double delta) {
  entries_.reserve(entries_.size() + static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    Append(prefix + std::to_string(i), epsilon, delta);
  }
}

BudgetLedger::Totals BudgetLedger::Total() const {
  // Neumaier-compensated sums; ledgers hold thousands of equal entries.
  auto compensated = [this](double Entry::*field) {
    double sum = 0.0, carry = 0.0;
    for (const Entry& e : entries_) {
      const double v = e.*field;
      const double t = sum + v;
      carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    }
    return sum + carry;
  };
  return {compensated(&Entry::epsilon), compensated(&Entry::delta)};
}

void BudgetLedger::WriteCsv(std::ostream& out) const {
  out << "label,epsilon,delta,cumulative_epsilon,cumulative_delta\n";
  double ce = 0.0, cd = 0.0;
  for (const Entry& e : entries_) {
    ce += e.epsilon;
    cd += e.delta;
    out << e.label << ',' << fmt::format("{},{},{},{}", e.epsilon, e.delta, ce, cd) << '\n';
  }
}

bool DeltaBudgetCheck(double delta, std::int64_t n) {
  if (n < 1) throw InvalidArgument("population size must be >= 1");
  const double nd = static_cast<double>(n);
  return nd * delta < 1.0 / nd;
}

}  // namespace dpmob
