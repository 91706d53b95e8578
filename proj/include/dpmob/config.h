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

#ifndef DPMOB_CONFIG_H_
#define DPMOB_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpmob/forecast.h"
#include "dpmob/optim.h"
#include "dpmob/privacy.h"
#include "dpmob/tune.h"

namespace dpmob {

// Experiment configuration: an INI file with [data], [model], [train], [dp],
// [privacy], [tune] and [run] sections. Unknown sections or keys are
// rejected with ConfigError.
struct ExperimentConfig {
  std::string text;  // the file, verbatim

  // [data]
  std::string dataset_path;  // resolved against the config file's directory
  bool clean = true;

  // [model], [train], [data] lag/split/scale
  ExperimentSettings settings;
  RunKind kind = RunKind::kNonPrivate;

  // [dp]
  double l2_norm_clip = 1.0;
  double noise_multiplier = 1.0;
  int num_microbatches = 0;  // 0: one microbatch per example

  // [privacy]
  PrivacyParams privacy{0.0, 1e-7, 1.0};
  bool clamp_nonnegative = false;
  std::uint64_t noise_seed = 0;

  // [tune]
  int tune_budget = 100;
  SearchStrategy tune_strategy = SearchStrategy::kRandom;
  bool tune_private = false;
  int tune_seeds_per_trial = 1;
  std::vector<double> tune_clip_choices{1.0, 1.5, 2.0, 2.5};

  // [run]
  int num_seeds = 10;
  std::uint64_t base_seed = 0;

  DpSgdConfig MakeDpConfig() const;
  std::vector<std::uint64_t> Seeds() const;  // base_seed, base_seed + 1, ...
};

// `base_dir` is used to resolve a relative dataset path.
ExperimentConfig ParseConfig(std::string_view text, const std::string& base_dir = ".");
ExperimentConfig LoadConfig(const std::string& path);

}  // namespace dpmob

#endif  // DPMOB_CONFIG_H_
