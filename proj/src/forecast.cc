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

#include "dpmob/forecast.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dpmob/errors.h"

namespace dpmob {
namespace {

struct Prepared {
  WindowedDataset train;  // scaled when settings.scale
  WindowedDataset test;
  std::optional<Scaler> scaler;
  std::size_t train_slots = 0;
};

Prepared PrepareData(const MobilitySeries& visible, const ExperimentSettings& s) {
  SplitResult parts = Split(visible, s.train_days, s.test_days);
  Prepared p;
  p.train_slots = parts.train.length();
  p.train = MakeWindows(parts.train, s.lag);
  p.test = MakeWindows(parts.test, s.lag, &parts.train);
  if (s.scale) {
    p.scaler = Scaler::Fit(p.train);
    p.train = p.scaler->Apply(p.train);
    p.test = p.scaler->Apply(p.test);
  }
  return p;
}

// Raw test-week targets. Only the test rows of `truth` are touched.
Tensor TestTruth(const MobilitySeries& truth, const ExperimentSettings& s) {
  const std::size_t n_test = static_cast<std::size_t>(s.test_days) * kSlotsPerDay;
  if (truth.length() < n_test) throw InvalidArgument("series shorter than the test period");
  const MobilitySeries test = truth.Slice(truth.length() - n_test, truth.length());
  Tensor y({n_test, test.num_regions()});
  for (std::size_t t = 0; t < n_test; ++t) {
    auto row = test.row(t);
    std::copy(row.begin(), row.end(), y.row(t).begin());
  }
  return y;
}

Tensor PredictOriginalScale(const ModelSpec& spec, const ModelParams& params,
                            const Prepared& data) {
  Tensor pred = Predict(spec, params, data.test);
  return data.scaler ? data.scaler->InvertTargets(pred) : pred;
}

std::vector<SeedRun> TrainSeeds(const ModelSpec& spec, const Prepared& data,
                                const Tensor& truth, const TrainConfig& cfg,
                                const ExperimentSettings& settings,
                                std::span<const std::uint64_t> seeds) {
  std::vector<SeedRun> runs(seeds.size());
  auto run_one = [&](std::size_t i) {
    SeedRun& r = runs[i];
    r.seed = seeds[i];
    try {
      RngStream init_rng(seeds[i], 0);
      RngStream train_rng(seeds[i], 1);
      ModelParams p0 = InitParams(spec, init_rng);
      TrainResult tr = Train(spec, p0, data.train, cfg, train_rng);
      r.predictions = PredictOriginalScale(spec, tr.params, data);
      if (!r.predictions.AllFinite()) throw RunFailed("non-finite predictions");
      r.metrics = ComputeMetrics(truth, r.predictions, settings.rmse_form);
      r.log = std::move(tr.log);
      r.params = std::move(tr.params);
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
    }
  };
  const int jobs = std::max(1, std::min<int>(settings.jobs, static_cast<int>(seeds.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) run_one(i);
      });
    }
    for (auto& w : workers) w.join();
  }
  return runs;
}

std::size_t SelectBest(const std::vector<SeedRun>& runs) {
  std::size_t best = runs.size();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].failed) continue;
    if (best == runs.size() || runs[i].metrics.mean_rmse < runs[best].metrics.mean_rmse) {
      best = i;
    }
  }
  if (best == runs.size()) {
    std::string msg = "every seeded run failed:";
    for (const auto& r : runs) msg += fmt::format(" [seed {}: {}]", r.seed, r.error);
    throw RunFailed(msg);
  }
  return best;
}

RunArtifact TrainedArtifact(RunKind kind, const MobilitySeries& visible,
                            const MobilitySeries& truth_source,
                            const ExperimentSettings& settings, const TrainConfig& cfg,
                            std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw InvalidArgument("at least one seed is required");
  RunArtifact a;
  a.kind = kind;
  a.settings = settings;
  a.spec = settings.MakeSpec(visible.num_regions());
  a.regions = visible.regions();
  const Prepared data = PrepareData(visible, settings);
  a.scaler = data.scaler;
  a.test_times = data.test.target_times;
  a.truth = TestTruth(truth_source, settings);
  a.runs = TrainSeeds(a.spec, data, a.truth, cfg, settings, seeds);
  a.best = SelectBest(a.runs);
  return a;
}

std::int64_t TrainSlots(const ExperimentSettings& s) {
  return static_cast<std::int64_t>(s.train_days) * kSlotsPerDay;
}

nlohmann::json MetricsJson(const MetricsReport& m) {
  return {{"rmse", m.rmse},           {"mae", m.mae},
          {"mean_rmse", m.mean_rmse}, {"mean_mae", m.mean_mae},
          {"std_rmse", m.std_rmse}};
}

}  // namespace

std::string ToString(RunKind kind) {
  switch (kind) {
    case RunKind::kBaseline: return "baseline";
    case RunKind::kNonPrivate: return "nonprivate";
    case RunKind::kGradientPerturbation: return "gradient-perturbation";
    case RunKind::kInputPerturbation: return "input-perturbation";
  }
  return "unknown";
}

RunKind ParseRunKind(const std::string& s) {
  if (s == "baseline") return RunKind::kBaseline;
  if (s == "nonprivate" || s == "non-private") return RunKind::kNonPrivate;
  if (s == "gradient-perturbation" || s == "gp") return RunKind::kGradientPerturbation;
  if (s == "input-perturbation" || s == "ip") return RunKind::kInputPerturbation;
  throw InvalidArgument("unknown run kind '" + s +
                        "' (baseline|nonprivate|gradient-perturbation|input-perturbation)");
}

MetricsReport ComputeMetrics(const Tensor& y, const Tensor& y_hat, RmseForm form) {
  CheckSameShape(y, y_hat, "metrics");
  if (y.rank() != 2 || y.dim(0) == 0 || y.dim(1) == 0) {
    throw InvalidArgument("metrics expect a nonempty n x R tensor");
  }
  const std::size_t n = y.dim(0), nr = y.dim(1);
  MetricsReport m;
  m.rmse.assign(nr, 0.0);
  m.mae.assign(nr, 0.0);
  for (std::size_t r = 0; r < nr; ++r) {
    double se = 0.0, ae = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double e = y.at(t, r) - y_hat.at(t, r);
      se += e * e;
      ae += std::abs(e);
    }
    const double nd = static_cast<double>(n);
    m.rmse[r] = form == RmseForm::kConventional ? std::sqrt(se / nd) : std::sqrt(se) / nd;
    m.mae[r] = ae / nd;
  }
  const double nrd = static_cast<double>(nr);
  for (std::size_t r = 0; r < nr; ++r) {
    m.mean_rmse += m.rmse[r] / nrd;
    m.mean_mae += m.mae[r] / nrd;
  }
  if (nr > 1) {
    double ss = 0.0;
    for (double v : m.rmse) ss += (v - m.mean_rmse) * (v - m.mean_rmse);
    m.std_rmse = std::sqrt(ss / (nrd - 1.0));
  }
  return m;
}

Tensor PersistenceForecast(const MobilitySeries& test, std::span<const double> last_train) {
  if (test.length() == 0) throw InvalidArgument("persistence forecast of an empty test set");
  const std::size_t nr = test.num_regions();
  if (last_train.size() != nr) throw InvalidArgument("last training slot has wrong width");
  Tensor pred({test.length(), nr});
  std::copy(last_train.begin(), last_train.end(), pred.row(0).begin());
  for (std::size_t t = 1; t < test.length(); ++t) {
    auto prev = test.row(t - 1);
    std::copy(prev.begin(), prev.end(), pred.row(t).begin());
  }
  return pred;
}

double UtilityLoss(double e_dp, double e_np) {
  if (!(e_np > 0.0)) throw InvalidArgument("reference error must be positive");
  return 100.0 * (e_dp - e_np) / e_np;
}

ModelSpec ExperimentSettings::MakeSpec(std::size_t num_regions) const {
  ModelSpec spec;
  spec.cell = cell;
  spec.bidirectional = bidirectional;
  spec.hidden_size = hidden_size;
  spec.input_size = static_cast<int>(num_regions) + kCyclicalFeatures;
  spec.output_size = static_cast<int>(num_regions);
  spec.activation = activation;
  spec.Validate();
  return spec;
}

RunArtifact RunBaseline(const MobilitySeries& cleaned, const ExperimentSettings& settings) {
  SplitResult parts = Split(cleaned, settings.train_days, settings.test_days);
  RunArtifact a;
  a.kind = RunKind::kBaseline;
  a.settings = settings;
  a.regions = cleaned.regions();
  a.test_times = parts.test.timestamps();
  a.truth = TestTruth(cleaned, settings);
  SeedRun r;
  r.predictions = PersistenceForecast(parts.test, parts.train.row(parts.train.length() - 1));
  r.metrics = ComputeMetrics(a.truth, r.predictions, settings.rmse_form);
  a.runs.push_back(std::move(r));
  return a;
}

RunArtifact RunNonPrivate(const MobilitySeries& cleaned, const ExperimentSettings& settings,
                          std::span<const std::uint64_t> seeds) {
  const NonPrivateConfig cfg{settings.batch_size, settings.epochs, settings.learning_rate};
  return TrainedArtifact(RunKind::kNonPrivate, cleaned, cleaned, settings, cfg, seeds);
}

RunArtifact RunGradientPerturbation(const MobilitySeries& cleaned,
                                    const ExperimentSettings& settings,
                                    const DpSgdConfig& dp_in, double delta,
                                    std::span<const std::uint64_t> seeds) {
  DpSgdConfig dp = dp_in;
  dp.batch_size = settings.batch_size;
  dp.epochs = settings.epochs;
  dp.learning_rate = settings.learning_rate;
  dp.Validate();
  if (!(dp.noise_multiplier > 0.0)) {
    throw InvalidArgument("noise_multiplier 0 gives no finite epsilon; refusing to label the "
                          "run as differentially private");
  }
  const std::int64_t n_l = TrainSlots(settings);
  if (!(delta > 0.0 && delta < 1.0) || !DeltaBudgetCheck(delta, n_l)) {
    throw InvalidArgument(fmt::format(
        "delta={} fails the budget check n*delta < 1/n for n={}; need delta < {:.6g}", delta,
        n_l, 1.0 / (static_cast<double>(n_l) * static_cast<double>(n_l))));
  }
  RunArtifact a =
      TrainedArtifact(RunKind::kGradientPerturbation, cleaned, cleaned, settings, dp, seeds);
  GradientPrivacy gp;
  gp.dp = dp;
  gp.delta = delta;
  gp.n_train = n_l;
  gp.q = static_cast<double>(dp.batch_size) / static_cast<double>(n_l);
  gp.steps = a.runs[a.best].log.total_steps;
  const EpsilonResult eps = ComputeEpsilon(gp.q, dp.noise_multiplier, gp.steps, delta);
  gp.epsilon = eps.epsilon;
  gp.order = eps.order;
  BudgetLedger ledger(n_l);
  ledger.AppendRepeated("sample-", n_l, gp.epsilon, delta);
  gp.epsilon_total = ledger.Total().epsilon;
  gp.delta_total = ledger.Total().delta;
  a.gradient_privacy = gp;
  return a;
}

RunArtifact RunInputPerturbation(const MobilitySeries& cleaned,
                                 const ExperimentSettings& settings,
                                 const PrivacyParams& privacy, std::uint64_t noise_seed,
                                 std::span<const std::uint64_t> seeds) {
  RngStream noise_rng(noise_seed, 0);
  const MobilitySeries sanitized = SanitizeSeries(cleaned, privacy, noise_rng);
  const NonPrivateConfig cfg{settings.batch_size, settings.epochs, settings.learning_rate};
  RunArtifact a = TrainedArtifact(RunKind::kInputPerturbation, sanitized, cleaned, settings,
                                  cfg, seeds);
  InputPrivacy ip;
  ip.record = *sanitized.privacy();
  ip.noise_seed = noise_seed;
  ip.releases = TrainSlots(settings);
  BudgetLedger ledger(ip.releases);
  ledger.AppendRepeated("snapshot-", ip.releases, ip.record.epsilon, ip.record.delta);
  ip.epsilon_total = ledger.Total().epsilon;
  ip.delta_total = ledger.Total().delta;
  a.input_privacy = ip;
  return a;
}

MetricsReport EvaluateModel(const MobilitySeries& visible, const MobilitySeries& truth,
                            const ExperimentSettings& settings, const ModelSpec& spec,
                            const ModelParams& params, Tensor* predictions) {
  params.Validate(spec);
  const Prepared data = PrepareData(visible, settings);
  Tensor pred = PredictOriginalScale(spec, params, data);
  MetricsReport m = ComputeMetrics(TestTruth(truth, settings), pred, settings.rmse_form);
  if (predictions != nullptr) *predictions = std::move(pred);
  return m;
}

void WriteMetricsCsv(std::ostream& out, std::span<const RunArtifact* const> runs) {
  out << "run_kind,region,rmse,mae\n";
  for (const RunArtifact* a : runs) {
    const MetricsReport& m = a->metrics();
    for (std::size_t r = 0; r < m.rmse.size(); ++r) {
      out << fmt::format("{},{},{},{}\n", ToString(a->kind), a->regions[r], m.rmse[r], m.mae[r]);
    }
    out << fmt::format("{},Mean,{},{}\n", ToString(a->kind), m.mean_rmse, m.mean_mae);
  }
}

void WritePredictionsCsv(std::ostream& out, const RunArtifact& run) {
  out << "datetime,region,y_true,y_pred\n";
  const Tensor& pred = run.predictions();
  for (std::size_t t = 0; t < run.test_times.size(); ++t) {
    const std::string ts = FormatTimestamp(run.test_times[t]);
    for (std::size_t r = 0; r < run.regions.size(); ++r) {
      out << fmt::format("{},{},{},{}\n", ts, run.regions[r], run.truth.at(t, r),
                         pred.at(t, r));
    }
  }
}

void WriteSummaryJson(std::ostream& out, const RunArtifact& run,
                      const std::string& config_echo) {
  using nlohmann::json;
  const ExperimentSettings& s = run.settings;
  json j;
  j["run_kind"] = ToString(run.kind);
  j["config"] = config_echo;
  j["settings"] = {{"cell", ToString(s.cell)},
                   {"bidirectional", s.bidirectional},
                   {"h1", s.hidden_size},
                   {"activation", ToString(s.activation)},
                   {"batch", s.batch_size},
                   {"learning_rate", s.learning_rate},
                   {"epochs", s.epochs},
                   {"lag", s.lag},
                   {"train_days", s.train_days},
                   {"test_days", s.test_days},
                   {"scale", s.scale},
                   {"rmse_form", s.rmse_form == RmseForm::kConventional ? "conventional"
                                                                       : "literal"},
                   {"adam_epsilon_hat", AdamState{}.epsilon_hat}};
  j["metrics"] = MetricsJson(run.metrics());
  json seeds = json::array();
  for (const SeedRun& r : run.runs) {
    json e = {{"seed", r.seed}, {"failed", r.failed}};
    if (r.failed) {
      e["error"] = r.error;
    } else {
      e["metrics"] = MetricsJson(r.metrics);
      e["steps"] = r.log.total_steps;
    }
    seeds.push_back(e);
  }
  j["runs"] = seeds;
  j["best_seed"] = run.runs[run.best].seed;
  if (run.scaler) j["scaler"] = {{"min", run.scaler->min()}, {"max", run.scaler->max()}};
  if (run.gradient_privacy) {
    const GradientPrivacy& gp = *run.gradient_privacy;
    j["privacy"] = {{"mechanism", "dp-sgd"},
                    {"l2_norm_clip", gp.dp.l2_norm_clip},
                    {"noise_multiplier", gp.dp.noise_multiplier},
                    {"num_microbatches", gp.dp.num_microbatches},
                    {"q", gp.q},
                    {"steps", gp.steps},
                    {"n_train", gp.n_train},
                    {"delta", gp.delta},
                    {"epsilon", gp.epsilon},
                    {"rdp_order", gp.order},
                    {"epsilon_total", gp.epsilon_total},
                    {"delta_total", gp.delta_total}};
  }
  if (run.input_privacy) {
    const InputPrivacy& ip = *run.input_privacy;
    j["privacy"] = {{"mechanism", ip.record.mechanism},
                    {"epsilon", ip.record.epsilon},
                    {"delta", ip.record.delta},
                    {"l2_sensitivity", ip.record.l2_sensitivity},
                    {"sigma", ip.record.sigma},
                    {"noise_seed", ip.noise_seed},
                    {"releases", ip.releases},
                    {"epsilon_total", ip.epsilon_total},
                    {"delta_total", ip.delta_total}};
  }
  out << j.dump(2) << '\n';
}

}  // namespace dpmob
