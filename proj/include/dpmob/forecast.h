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

#ifndef DPMOB_FORECAST_H_
#define DPMOB_FORECAST_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpmob/data.h"
#include "dpmob/neural.h"
#include "dpmob/optim.h"
#include "dpmob/privacy.h"

namespace dpmob {

enum class RunKind { kBaseline, kNonPrivate, kGradientPerturbation, kInputPerturbation };
std::string ToString(RunKind kind);
RunKind ParseRunKind(const std::string& s);

// kConventional: sqrt(mean(err^2)). kLiteral: sqrt(sum(err^2)) / n.
enum class RmseForm { kConventional, kLiteral };

struct MetricsReport {
  std::vector<double> rmse;  // per region
  std::vector<double> mae;   // per region
  double mean_rmse = 0.0;
  double mean_mae = 0.0;
  double std_rmse = 0.0;  // across regions, n - 1 convention (0 for one region)
};

// y and y_hat are n x R.
MetricsReport ComputeMetrics(const Tensor& y, const Tensor& y_hat,
                             RmseForm form = RmseForm::kConventional);

// x_{t+1} = x_t: slot 0 of `test` is predicted by `last_train`, slot k by
// test slot k - 1. Returns n_t x R.
Tensor PersistenceForecast(const MobilitySeries& test, std::span<const double> last_train);

// 100 * (e_dp - e_np) / e_np, in percent.
double UtilityLoss(double e_dp, double e_np);

struct ExperimentSettings {
  CellKind cell = CellKind::kGru;
  bool bidirectional = true;
  int hidden_size = 175;
  Activation activation = Activation::kRelu;
  int batch_size = 5;
  double learning_rate = 2.89e-4;
  int epochs = 100;
  std::size_t lag = 6;
  int train_days = 65;
  int test_days = 7;
  bool scale = true;
  RmseForm rmse_form = RmseForm::kConventional;
  int jobs = 1;

  ModelSpec MakeSpec(std::size_t num_regions) const;
};

struct SeedRun {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  MetricsReport metrics;
  TrainLog log;
  ModelParams params;
  Tensor predictions;  // n_t x R, original scale
};

struct GradientPrivacy {
  DpSgdConfig dp;
  double delta = 0.0;
  std::int64_t n_train = 0;  // accounting population n_l (training slots)
  double q = 0.0;
  std::int64_t steps = 0;
  double epsilon = 0.0;
  int order = 0;
  double epsilon_total = 0.0;  // n_l * epsilon, sequential composition
  double delta_total = 0.0;
};

struct InputPrivacy {
  PrivacyRecord record;
  std::uint64_t noise_seed = 0;
  std::int64_t releases = 0;  // sanitized training snapshots counted in the ledger
  double epsilon_total = 0.0;
  double delta_total = 0.0;
};

struct RunArtifact {
  RunKind kind = RunKind::kBaseline;
  ModelSpec spec;
  ExperimentSettings settings;
  std::optional<Scaler> scaler;
  std::vector<std::string> regions;
  std::vector<Timestamp> test_times;
  Tensor truth;  // n_t x R raw test targets
  std::vector<SeedRun> runs;
  std::size_t best = 0;
  std::optional<GradientPrivacy> gradient_privacy;
  std::optional<InputPrivacy> input_privacy;

  const MetricsReport& metrics() const { return runs.at(best).metrics; }
  const Tensor& predictions() const { return runs.at(best).predictions; }
};

RunArtifact RunBaseline(const MobilitySeries& cleaned, const ExperimentSettings& settings);

// Split, window, scale, train with plain Adam on every seed, forecast the test
// week one step ahead and keep the seed with the lowest mean RMSE.
RunArtifact RunNonPrivate(const MobilitySeries& cleaned, const ExperimentSettings& settings,
                          std::span<const std::uint64_t> seeds);

// As RunNonPrivate with DP-Adam. Refuses noise_multiplier == 0 and deltas that
// fail DeltaBudgetCheck against the number of training slots.
RunArtifact RunGradientPerturbation(const MobilitySeries& cleaned,
                                    const ExperimentSettings& settings,
                                    const DpSgdConfig& dp, double delta,
                                    std::span<const std::uint64_t> seeds);

// Sanitizes the whole series once with the Gaussian mechanism; everything the
// trainer sees (inputs, targets, scaler) comes from the sanitized copy. Only
// the raw test slots are read afterwards, as evaluation targets.
RunArtifact RunInputPerturbation(const MobilitySeries& cleaned,
                                 const ExperimentSettings& settings,
                                 const PrivacyParams& privacy, std::uint64_t noise_seed,
                                 std::span<const std::uint64_t> seeds);

// Evaluates fixed parameters on the test week with the pipelines' data
// preparation. Windows and the scaler come from `visible` (the cleaned
// series, or its sanitized copy for input perturbation); targets are the
// test slots of `truth`.
MetricsReport EvaluateModel(const MobilitySeries& visible, const MobilitySeries& truth,
                            const ExperimentSettings& settings, const ModelSpec& spec,
                            const ModelParams& params, Tensor* predictions = nullptr);

// run_kind,region,rmse,mae ; one row per region plus a "Mean" row.
void WriteMetricsCsv(std::ostream& out, std::span<const RunArtifact* const> runs);
// datetime,region,y_true,y_pred
void WritePredictionsCsv(std::ostream& out, const RunArtifact& run);
// Structured summary (JSON). `config_echo` is embedded verbatim.
void WriteSummaryJson(std::ostream& out, const RunArtifact& run,
                      const std::string& config_echo);

}  // namespace dpmob

#endif  // DPMOB_FORECAST_H_
