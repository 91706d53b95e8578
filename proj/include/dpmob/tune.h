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

#ifndef DPMOB_TUNE_H_
#define DPMOB_TUNE_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dpmob/errors.h"
#include "dpmob/forecast.h"
#include "dpmob/rng.h"

namespace dpmob {

// Every trial failed. what() lists the per-trial errors.
class SearchFailed : public RunFailed {
 public:
  SearchFailed(const std::string& what, std::vector<std::string> trial_errors)
      : RunFailed(what), trial_errors_(std::move(trial_errors)) {}
  const std::vector<std::string>& trial_errors() const { return trial_errors_; }

 private:
  std::vector<std::string> trial_errors_;
};

struct SearchSpace {
  int h1_min = 25, h1_max = 500, h1_step = 25;
  int batch_min = 5, batch_max = 40, batch_step = 5;
  double lr_min = 1e-5, lr_max = 3e-3;  // log-uniform
  // DP axes. Empty clip_choices means a non-private campaign.
  std::vector<double> clip_choices;
  std::optional<double> noise_multiplier;

  bool is_private() const { return !clip_choices.empty(); }
  void Validate() const;
};

struct TrialConfig {
  int h1 = 0;
  int batch = 0;
  double learning_rate = 0.0;
  std::optional<double> clip;
  std::optional<double> noise_multiplier;
};

// What a pipeline reports back for one trial. `epsilon` is set for private
// trials and must come from that trial's own batch size and step count.
struct TrialOutcome {
  MetricsReport metrics;
  std::optional<double> epsilon;
};

using TrialPipeline = std::function<TrialOutcome(const TrialConfig&, std::uint64_t seed)>;

struct Trial {
  int id = 0;
  TrialConfig config;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  MetricsReport metrics;
  std::optional<double> epsilon;
  double objective = 0.0;
};

struct TuneResult {
  std::vector<Trial> trials;
  std::size_t best = 0;

  const Trial& best_trial() const { return trials.at(best); }
};

enum class SearchStrategy { kRandom, kTpeLite };
std::string ToString(SearchStrategy s);
SearchStrategy ParseSearchStrategy(const std::string& s);

// mean RMSE + sample std of the per-region RMSEs. Needs >= 2 regions.
double ObjectiveNonPrivate(const MetricsReport& m);
// ObjectiveNonPrivate(m) * exp(epsilon), epsilon > 0.
double ObjectivePrivate(const MetricsReport& m, double epsilon);

// One draw from the space: grid-aligned h1 and batch, log-uniform learning
// rate, uniform clip choice.
TrialConfig SampleConfig(const SearchSpace& space, RngStream& rng);

struct SearchOptions {
  int budget = 100;
  SearchStrategy strategy = SearchStrategy::kRandom;
  int jobs = 1;
  int warmup = 20;         // tpe-lite: random trials before refinement
  double top_share = 0.25;  // tpe-lite: quantile the refinements start from
};

// Samples `budget` configurations, runs the pipeline on each and returns all
// trials with the argmin. Sampling depends only on rng and options, never on
// thread scheduling. Failed trials are kept and skipped for the argmin.
TuneResult RunSearch(const SearchSpace& space, const TrialPipeline& pipeline,
                     const SearchOptions& options, RngStream& rng);

// trial_id,h1,batch,learning_rate,clip,noise_multiplier,epsilon,objective,mean_rmse,mean_mae
void WriteTrialsCsv(std::ostream& out, const TuneResult& result);

}  // namespace dpmob

#endif  // DPMOB_TUNE_H_
