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

#include "dpmob/tune.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "dpmob/errors.h"

namespace dpmob {
namespace {

int SampleGrid(int lo, int hi, int step, RngStream& rng) {
  const int slots = (hi - lo) / step + 1;
  return lo + step * static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(slots)));
}

int ClampToGrid(int v, int lo, int hi, int step) {
  v = std::clamp(v, lo, hi);
  return lo + ((v - lo) / step) * step;
}

double SampleLogUniform(double lo, double hi, RngStream& rng) {
  const double a = std::log(lo), b = std::log(hi);
  return std::exp(a + (b - a) * rng.Uniform());
}

void Execute(const TrialPipeline& pipeline, Trial& t) {
  try {
    TrialOutcome out = pipeline(t.config, t.seed);
    t.metrics = std::move(out.metrics);
    t.epsilon = out.epsilon;
    t.objective = t.epsilon ? ObjectivePrivate(t.metrics, *t.epsilon)
                            : ObjectiveNonPrivate(t.metrics);
    if (!std::isfinite(t.objective)) throw RunFailed("non-finite objective");
  } catch (const std::exception& e) {
    t.failed = true;
    t.error = e.what();
    t.objective = std::numeric_limits<double>::infinity();
  }
}

void ExecuteAll(const TrialPipeline& pipeline, std::span<Trial> trials, int jobs) {
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(trials.size())));
  if (jobs == 1) {
    for (Trial& t : trials) Execute(pipeline, t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < trials.size(); i = next++) Execute(pipeline, trials[i]);
    });
  }
  for (auto& w : workers) w.join();
}

Trial NewTrial(int id, TrialConfig config, RngStream& rng) {
  Trial t;
  t.id = id;
  t.config = std::move(config);
  t.seed = rng.NextU64();
  return t;
}

TrialConfig Refine(const SearchSpace& space, const std::vector<Trial>& done,
                   double top_share, RngStream& rng) {
  std::vector<const Trial*> ok;
  for (const Trial& t : done) {
    if (!t.failed) ok.push_back(&t);
  }
  if (ok.empty()) return SampleConfig(space, rng);
  std::stable_sort(ok.begin(), ok.end(),
                   [](const Trial* a, const Trial* b) { return a->objective < b->objective; });
  const std::size_t top = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(top_share * static_cast<double>(ok.size()))));
  const TrialConfig& parent = ok[rng.UniformInt(top)]->config;

  TrialConfig c = parent;
  const int dh = static_cast<int>(rng.UniformInt(5)) - 2;
  const int db = static_cast<int>(rng.UniformInt(3)) - 1;
  c.h1 = ClampToGrid(parent.h1 + dh * space.h1_step, space.h1_min, space.h1_max, space.h1_step);
  c.batch = ClampToGrid(parent.batch + db * space.batch_step, space.batch_min, space.batch_max,
                        space.batch_step);
  c.learning_rate =
      std::clamp(parent.learning_rate * std::exp(0.5 * rng.Normal()), space.lr_min, space.lr_max);
  if (space.is_private() && rng.Uniform() < 0.25) {
    c.clip = space.clip_choices[rng.UniformInt(space.clip_choices.size())];
  }
  return c;
}

}  // namespace

void SearchSpace::Validate() const {
  if (h1_step < 1 || h1_min < 1 || h1_max < h1_min || (h1_max - h1_min) % h1_step != 0) {
    throw InvalidArgument("h1 range must be a nonempty grid of positive values");
  }
  if (batch_step < 1 || batch_min < 1 || batch_max < batch_min ||
      (batch_max - batch_min) % batch_step != 0) {
    throw InvalidArgument("batch range must be a nonempty grid of positive values");
  }
  if (!(lr_min > 0.0 && lr_max >= lr_min)) {
    throw InvalidArgument("learning-rate range must be positive and ordered");
  }
  for (double c : clip_choices) {
    if (!(c > 0.0)) throw InvalidArgument("clip choices must be positive");
  }
  if (noise_multiplier && !(*noise_multiplier > 0.0)) {
    throw InvalidArgument("noise multiplier must be positive for a private campaign");
  }
  if (is_private() && !noise_multiplier) {
    throw InvalidArgument("private campaigns need a fixed noise multiplier");
  }
}

std::string ToString(SearchStrategy s) {
  return s == SearchStrategy::kRandom ? "random" : "tpe-lite";
}

SearchStrategy ParseSearchStrategy(const std::string& s) {
  if (s == "random") return SearchStrategy::kRandom;
  if (s == "tpe-lite") return SearchStrategy::kTpeLite;
  throw InvalidArgument("unknown search strategy '" + s + "' (random|tpe-lite)");
}

double ObjectiveNonPrivate(const MetricsReport& m) {
  const std::size_t n = m.rmse.size();
  if (n < 2) throw InvalidArgument("objective needs at least two regions (std undefined)");
  double mean = 0.0;
  for (double v : m.rmse) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : m.rmse) ss += (v - mean) * (v - mean);
  return mean + std::sqrt(ss / static_cast<double>(n - 1));
}

double ObjectivePrivate(const MetricsReport& m, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("private objective needs epsilon > 0");
  return ObjectiveNonPrivate(m) * std::exp(epsilon);
}

TrialConfig SampleConfig(const SearchSpace& space, RngStream& rng) {
  TrialConfig c;
  c.h1 = SampleGrid(space.h1_min, space.h1_max, space.h1_step, rng);
  c.batch = SampleGrid(space.batch_min, space.batch_max, space.batch_step, rng);
  c.learning_rate = SampleLogUniform(space.lr_min, space.lr_max, rng);
  if (space.is_private()) {
    c.clip = space.clip_choices[rng.UniformInt(space.clip_choices.size())];
    c.noise_multiplier = space.noise_multiplier;
  }
  return c;
}

TuneResult RunSearch(const SearchSpace& space, const TrialPipeline& pipeline,
                     const SearchOptions& options, RngStream& rng) {
  space.Validate();
  if (options.budget < 1) throw InvalidArgument("search budget must be >= 1");
  if (!pipeline) throw InvalidArgument("search needs a pipeline");
  TuneResult result;
  auto& trials = result.trials;
  trials.reserve(static_cast<std::size_t>(options.budget));

  const int first_phase = options.strategy == SearchStrategy::kRandom
                              ? options.budget
                              : std::min(options.budget, std::max(1, options.warmup));
  for (int i = 0; i < first_phase; ++i) {
    TrialConfig c = SampleConfig(space, rng);
    trials.push_back(NewTrial(i, std::move(c), rng));
  }
  ExecuteAll(pipeline, trials, options.jobs);

  for (int i = first_phase; i < options.budget; ++i) {
    TrialConfig c = Refine(space, trials, options.top_share, rng);
    trials.push_back(NewTrial(i, std::move(c), rng));
    Execute(pipeline, trials.back());
  }

  std::vector<std::string> errors;
  std::size_t best = trials.size();
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].failed) {
      errors.push_back(fmt::format("trial {}: {}", trials[i].id, trials[i].error));
      continue;
    }
    if (best == trials.size() || trials[i].objective < trials[best].objective) best = i;
  }
  if (best == trials.size()) {
    std::string msg = "every trial failed";
    for (const auto& e : errors) msg += "; " + e;
    throw SearchFailed(msg, std::move(errors));
  }
  result.best = best;
  return result;
}

void WriteTrialsCsv(std::ostream& out, const TuneResult& result) {
  out << "trial_id,h1,batch,learning_rate,clip,noise_multiplier,epsilon,objective,mean_rmse,"
         "mean_mae\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? fmt::format("{}", *v) : std::string();
  };
  for (const Trial& t : result.trials) {
    if (t.failed) {
      out << fmt::format("{},{},{},{},{},{},,,,\n", t.id, t.config.h1, t.config.batch,
                         t.config.learning_rate, opt(t.config.clip),
                         opt(t.config.noise_multiplier));
      continue;
    }
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", t.id, t.config.h1, t.config.batch,
                       t.config.learning_rate, opt(t.config.clip),
                       opt(t.config.noise_multiplier), opt(t.epsilon), t.objective,
                       t.metrics.mean_rmse, t.metrics.mean_mae);
  }
}

}  // namespace dpmob
