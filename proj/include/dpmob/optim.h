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

#ifndef DPMOB_OPTIM_H_
#define DPMOB_OPTIM_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "dpmob/data.h"
#include "dpmob/neural.h"
#include "dpmob/rng.h"

namespace dpmob {

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_hat = 1e-7;

  static AdamState Fresh(const ModelParams& like);
};

// Bias-corrected Adam:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps_hat).
// Returns the updated parameters (with a fresh revision); `state` advances.
ModelParams AdamStep(const ModelParams& params, const GradientSet& grad,
                     AdamState& state, double learning_rate);

// Scales every tensor by C / n when the global norm n exceeds C.
GradientSet ClipToNorm(GradientSet g, double clip);

// (1/m) * (sum_i clip(g_i, C) + N(0, (noise_multiplier * C)^2 I)), with the
// noise drawn once for the sum in Named() tensor order.
GradientSet DpAggregate(std::span<const GradientSet> per_microbatch, double clip,
                        double noise_multiplier, RngStream& rng);

struct NonPrivateConfig {
  int batch_size = 5;
  int epochs = 100;
  double learning_rate = 2.89e-4;
};

struct DpSgdConfig {
  double l2_norm_clip = 1.0;
  double noise_multiplier = 1.0;
  int num_microbatches = 5;
  int batch_size = 5;
  int epochs = 100;
  double learning_rate = 1e-3;

  void Validate() const;
};

using TrainConfig = std::variant<NonPrivateConfig, DpSgdConfig>;

struct EpochRecord {
  int epoch = 0;               // 1-based
  std::int64_t step_count = 0;  // cumulative optimizer steps
  double train_mae = 0.0;       // mean per-example MAE seen during the epoch
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::int64_t total_steps = 0;
  std::int64_t dataset_size = 0;
  int batch_size = 0;

  // epoch,step_count,train_mae
  void WriteCsv(std::ostream& out) const;
};

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

// Optional per-step hook (called after every optimizer update).
using StepObserver = std::function<void(std::int64_t step, const ModelParams&)>;

// epochs x floor(n / batch) steps over a fresh uniform permutation per epoch;
// trailing partial batches are dropped. Throws TrainingDiverged when an
// epoch's loss is non-finite.
TrainResult Train(const ModelSpec& spec, const ModelParams& params0,
                  const WindowedDataset& dataset, const TrainConfig& cfg,
                  RngStream& rng, const StepObserver& observer = {});

// Expected optimizer step count for a training run.
std::int64_t ExpectedSteps(std::int64_t n, int batch_size, int epochs);

// Predictions for every window, n x output_size.
Tensor Predict(const ModelSpec& spec, const ModelParams& params,
               const WindowedDataset& dataset);

}  // namespace dpmob

#endif  // DPMOB_OPTIM_H_
