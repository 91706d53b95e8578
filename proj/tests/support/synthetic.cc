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

#include "support/synthetic.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dpmob/rng.h"

namespace dpmob::testing {

MobilitySeries SyntheticMobility(const SyntheticOptions& o) {
  const std::size_t n = static_cast<std::size_t>(o.days) * kSlotsPerDay;
  const std::size_t nr =
      o.region_bases.empty() ? static_cast<std::size_t>(o.regions) : o.region_bases.size();
  const Timestamp start = ParseTimestamp(o.start);
  RngStream rng(o.seed, 0);
  std::vector<Timestamp> ts(n);
  Tensor counts({n, nr});
  std::vector<std::string> regions;
  for (std::size_t r = 0; r < nr; ++r) regions.push_back("R" + std::to_string(r + 1));
  for (std::size_t t = 0; t < n; ++t) {
    ts[t] = start + kSlotLength * static_cast<long>(t);
    const double day = 2.0 * std::numbers::pi * static_cast<double>(t % kSlotsPerDay) /
                       kSlotsPerDay;
    const double week = 2.0 * std::numbers::pi * static_cast<double>(t % (7 * kSlotsPerDay)) /
                        (7.0 * kSlotsPerDay);
    for (std::size_t r = 0; r < nr; ++r) {
      const double base =
          o.region_bases.empty() ? o.base * static_cast<double>(r + 1) : o.region_bases[r];
      const double shape = 1.0 + o.daily_amplitude * std::sin(day - 0.5 * std::numbers::pi +
                                                              0.3 * static_cast<double>(r)) +
                           o.weekly_amplitude * std::cos(week);
      const double v = base * shape + o.jitter * base * rng.Normal();
      counts.at(t, r) = std::max(0.0, std::round(v));
    }
  }
  return MobilitySeries(std::move(ts), std::move(counts), std::move(regions));
}

std::string ToCsv(const MobilitySeries& s) {
  std::ostringstream out;
  WriteSeriesCsv(out, s);
  return out.str();
}

std::string MakeTempDir(const std::string& name) {
  const auto base = std::filesystem::temp_directory_path() / "dpmob_tests";
  const auto dir = base / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string WriteTempFile(const std::string& name, const std::string& content) {
  const auto base = std::filesystem::temp_directory_path() / "dpmob_tests";
  std::filesystem::create_directories(base);
  const auto path = base / name;
  std::ofstream(path, std::ios::binary) << content;
  return path.string();
}

}  // namespace dpmob::testing
