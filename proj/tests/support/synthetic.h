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

#ifndef DPMOB_TESTS_SUPPORT_SYNTHETIC_H_
#define DPMOB_TESTS_SUPPORT_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dpmob/data.h"

namespace dpmob::testing {

// Smooth daily and weekly cycles per region plus Gaussian jitter, rounded to
// nonnegative integers. Starts on a Monday at 00:00.
struct SyntheticOptions {
  int days = 20;
  int regions = 2;
  double base = 1000.0;
  double daily_amplitude = 0.6;
  double weekly_amplitude = 0.15;
  double jitter = 0.01;  // relative to each region's base
  std::uint64_t seed = 1;
  // Per-region levels; when empty region r uses base * (r + 1).
  std::vector<double> region_bases;
  std::string start = "2020-09-07 00:00:00";
};

MobilitySeries SyntheticMobility(const SyntheticOptions& options);

std::string ToCsv(const MobilitySeries& s);

// Writes `content` to a fresh file under the test temp directory.
std::string WriteTempFile(const std::string& name, const std::string& content);
std::string MakeTempDir(const std::string& name);

}  // namespace dpmob::testing

#endif  // DPMOB_TESTS_SUPPORT_SYNTHETIC_H_
