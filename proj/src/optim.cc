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

#include "dpmob/optim.h"

#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "dpmob/errors.h"
#include "dpmob/numeric.h"

namespace dpmob {
namespace {

void AdamUpdateInPlace(ModelParams& params, const GradientSet& grad, AdamState& s,
                       double lr) {
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double bc1 = 1.0 - std::pow(s.beta1, t);
  const double bc2 = 1.0 - std::pow(s.beta2, t);
  auto p = params.Named();
  auto g = grad.Named();
  auto m = s.m.Named();
  auto v = s.v.Named();
  if (p.size() != g.size() || p.size() != m.size()) {
    throw InvalidArgument("adam: parameter, gradient and state layouts differ");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    CheckSameShape(*p[i].second, *g[i].second, "adam gradient");
    double* pd = p[i].second->data();
    const double* gd = g[i].second->data();
    double* md = m[i].second->data();
    double* vd = v[i].second->data();
    const std::size_t n = p[i].second->size();
    for (std::size_t k = 0; k < n; ++k) {
      md[k] = s.beta1 * md[k] + (1.0 - s.beta1) * gd[k];
      vd[k] = s.beta2 * vd[k] + (1.0 - s.beta2) * gd[k] * gd[k];
      const double m_hat = md[k] / bc1;
      const double v_hat = vd[k] / bc2;
      pd[k] -= lr * m_hat / (std::sqrt(v_hat) + s.epsilon_hat);
    }
  }
  params.Touch();
}

void ClipInPlace(GradientSet& g, double clip) {
  const double norm = GlobalNorm(g);
  if (norm > clip) Scale(g, clip / norm);
}

void AggregateInto(std::span<GradientSet> microbatches, double clip,
                   double noise_multiplier, RngStream& rng, GradientSet& out) {
  for (auto& [name, t] : out.Named()) t->Fill(0.0);
  for (GradientSet& g : microbatches) {
    ClipInPlace(g, clip);
    AddScaled(out, 1.0, g);
  }
  const double stddev = noise_multiplier * clip;
  for (auto& [name, t] : out.Named()) {
    if (stddev > 0.0) *t += GaussianSample(t->shape(), stddev, rng);
  }
  Scale(out, 1.0 / static_cast<double>(microbatches.size()));
}

struct BatchPlan {
  int batch_size;
  int epochs;
  double learning_rate;
};

BatchPlan PlanOf(const TrainConfig& cfg) {
  return std::visit(
      [](const auto& c) { return BatchPlan{c.batch_size, c.epochs, c.learning_rate}; }, cfg);
}

}  // namespace

AdamState AdamState::Fresh(const ModelParams& like) {
  AdamState s;
  s.m = ZerosLike(like);
  s.v = ZerosLike(like);
  return s;
}

ModelParams AdamStep(const ModelParams& params, const GradientSet& grad,
                     AdamState& state, double learning_rate) {
  ModelParams out = params;
  AdamUpdateInPlace(out, grad, state, learning_rate);
  return out;
}

GradientSet ClipToNorm(GradientSet g, double clip) {
  if (!(clip > 0.0)) throw InvalidArgument("clip norm must be positive");
  ClipInPlace(g, clip);
  return g;
}

GradientSet DpAggregate(std::span<const GradientSet> per_microbatch, double clip,
                        double noise_multiplier, RngStream& rng) {
  if (per_microbatch.empty()) throw InvalidArgument("dp_aggregate needs at least one gradient");
  if (!(clip > 0.0)) throw InvalidArgument("clip norm must be positive");
  if (!(noise_multiplier >= 0.0)) throw InvalidArgument("noise multiplier must be >= 0");
  std::vector<GradientSet> copies(per_microbatch.begin(), per_microbatch.end());
  const auto layout = copies.front().Named();
  for (const GradientSet& g : copies) {
    const auto named = g.Named();
    if (named.size() != layout.size()) throw InvalidArgument("microbatch gradient layouts differ");
    for (std::size_t i = 0; i < named.size(); ++i) {
      CheckSameShape(*named[i].second, *layout[i].second, "microbatch gradient");
    }
  }
  GradientSet out = ZerosLike(copies.front());
  AggregateInto(copies, clip, noise_multiplier, rng, out);
  return out;
}

void DpSgdConfig::Validate() const {
  if (!(l2_norm_clip > 0.0)) throw InvalidArgument("l2_norm_clip must be positive");
  if (!(noise_multiplier >= 0.0)) throw InvalidArgument("noise_multiplier must be >= 0");
  if (num_microbatches < 1 || batch_size < 1) {
    throw InvalidArgument("batch size and microbatch count must be positive");
  }
  if (batch_size % num_microbatches != 0) {
    throw InvalidArgument(fmt::format("num_microbatches ({}) must divide batch_size ({})",
                                      num_microbatches, batch_size));
  }
}

void TrainLog::WriteCsv(std::ostream& out) const {
  out << "epoch,step_count,train_mae\n";
  for (const EpochRecord& r : epochs) {
    out << fmt::format("{},{},{}\n", r.epoch, r.step_count, r.train_mae);
  }
}

std::int64_t ExpectedSteps(std::int64_t n, int batch_size, int epochs) {
  return static_cast<std::int64_t>(epochs) * (n / batch_size);
}

TrainResult Train(const ModelSpec& spec, const ModelParams& params0,
                  const WindowedDataset& dataset, const TrainConfig& cfg,
                  RngStream& rng, const StepObserver& observer) {
  const BatchPlan plan = PlanOf(cfg);
  const std::size_t n = dataset.size();
  if (n == 0) throw InvalidArgument("training dataset is empty");
  if (plan.batch_size < 1 || static_cast<std::size_t>(plan.batch_size) > n) {
    throw InvalidArgument(fmt::format("batch size {} must be in [1, {}]", plan.batch_size, n));
  }
  if (plan.epochs < 0) throw InvalidArgument("epochs must be nonnegative");
  if (!(plan.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  const auto* dp = std::get_if<DpSgdConfig>(&cfg);
  if (dp != nullptr) dp->Validate();
  params0.Validate(spec);

  RngStream shuffle_rng(rng.NextU64(), 0);
  RngStream noise_rng(rng.NextU64(), 1);

  TrainResult result{params0, {}};
  ModelParams& params = result.params;
  TrainLog& log = result.log;
  log.dataset_size = static_cast<std::int64_t>(n);
  log.batch_size = plan.batch_size;

  AdamState adam = AdamState::Fresh(params);
  const std::size_t b = static_cast<std::size_t>(plan.batch_size);
  const std::size_t steps_per_epoch = n / b;
  const std::size_t groups = dp != nullptr ? static_cast<std::size_t>(dp->num_microbatches) : 1;
  const std::size_t group_size = b / groups;

  std::vector<GradientSet> group_grads(groups, ZerosLike(params));
  GradientSet step_grad = ZerosLike(params);
  std::vector<std::size_t> order(n);

  for (int epoch = 1; epoch <= plan.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.Shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      for (GradientSet& g : group_grads) {
        for (auto& [name, t] : g.Named()) t->Fill(0.0);
      }
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t idx = order[s * b + k];
        const ForwardResult fr = Forward(spec, params, dataset.Window(idx));
        loss_sum += AccumulateGradient(spec, params, fr.tape, dataset.Target(idx),
                                       1.0 / static_cast<double>(group_size),
                                       group_grads[k / group_size]);
      }
      if (dp != nullptr) {
        AggregateInto(group_grads, dp->l2_norm_clip, dp->noise_multiplier, noise_rng,
                      step_grad);
        AdamUpdateInPlace(params, step_grad, adam, plan.learning_rate);
      } else {
        AdamUpdateInPlace(params, group_grads.front(), adam, plan.learning_rate);
      }
      ++log.total_steps;
      if (observer) observer(log.total_steps, params);
    }
    const double mae = loss_sum / static_cast<double>(steps_per_epoch * b);
    if (!std::isfinite(mae) || !params.dense_b.AllFinite()) throw TrainingDiverged(epoch);
    log.epochs.push_back({epoch, log.total_steps, mae});
  }
  return result;
}

Tensor Predict(const ModelSpec& spec, const ModelParams& params,
               const WindowedDataset& dataset) {
  Tensor out({dataset.size(), static_cast<std::size_t>(spec.output_size)});
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const ForwardResult fr = Forward(spec, params, dataset.Window(i));
    std::copy(fr.prediction.values().begin(), fr.prediction.values().end(),
              out.row(i).begin());
  }
  return out;
}

}  // namespace dpmob
