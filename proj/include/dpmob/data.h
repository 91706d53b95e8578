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

#ifndef DPMOB_DATA_H_
#define DPMOB_DATA_H_

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpmob/tensor.h"

namespace dpmob {

using Timestamp = std::chrono::sys_seconds;

inline constexpr std::chrono::seconds kSlotLength{30 * 60};
inline constexpr int kSlotsPerDay = 48;
inline constexpr int kCyclicalFeatures = 4;

// "YYYY-MM-DD HH:MM:SS" (UTC, no zone suffix).
Timestamp ParseTimestamp(std::string_view text);
std::string FormatTimestamp(Timestamp ts);

// Provenance of a sanitized series. Attached by the Gaussian mechanism and
// carried unchanged through every derived series; there is no way to remove
// or lower it once set.
struct PrivacyRecord {
  std::string mechanism;
  double epsilon = 0.0;
  double delta = 0.0;
  double l2_sensitivity = 0.0;
  double sigma = 0.0;
  bool clamped_nonnegative = false;
};

// Counts how often each raw row of a series is read. Copies and slices of a
// series share its probe.
class ReadProbe {
 public:
  explicit ReadProbe(std::size_t rows) : reads_(rows, 0) {}
  void Record(std::size_t row) { ++reads_.at(row); }
  std::size_t reads(std::size_t row) const { return reads_.at(row); }
  std::size_t total() const;
  std::size_t rows() const { return reads_.size(); }

 private:
  std::vector<std::size_t> reads_;
};

// Timestamped tau x R matrix of per-region counts on a regular 30-minute
// grid. Slots with no observation are marked absent until cleaning fills
// them.
class MobilitySeries {
 public:
  MobilitySeries() = default;
  MobilitySeries(std::vector<Timestamp> timestamps, Tensor counts,
                 std::vector<std::string> regions, std::vector<bool> present = {});

  std::size_t length() const { return timestamps_.size(); }
  std::size_t num_regions() const { return regions_.size(); }
  const std::vector<Timestamp>& timestamps() const { return timestamps_; }
  const std::vector<std::string>& regions() const { return regions_; }

  // Value accessors record reads on an attached probe.
  std::span<const double> row(std::size_t t) const;
  double value(std::size_t t, std::size_t r) const { return row(t)[r]; }
  const Tensor& counts() const;

  bool present(std::size_t t) const { return present_[t]; }
  bool HasGaps() const;

  bool sanitized() const { return privacy_.has_value(); }
  const std::optional<PrivacyRecord>& privacy() const { return privacy_; }

  // Rows [begin, end). Keeps the privacy record and the probe.
  MobilitySeries Slice(std::size_t begin, std::size_t end) const;
  // Same timestamps, regions and privacy record; new values (all present).
  MobilitySeries WithCounts(Tensor counts) const;

  void AttachProbe(std::shared_ptr<ReadProbe> probe);

  // Builds the output of a privacy mechanism.
  static MobilitySeries MakeSanitized(const MobilitySeries& shape_source,
                                      Tensor noisy_counts, PrivacyRecord record);

 private:
  void RecordRead(std::size_t t) const;

  std::vector<Timestamp> timestamps_;
  Tensor counts_;
  std::vector<std::string> regions_;
  std::vector<bool> present_;
  std::optional<PrivacyRecord> privacy_;
  std::shared_ptr<ReadProbe> probe_;
  std::size_t probe_offset_ = 0;
};

// CSV with header "datetime,R1,...,RK", datetime as "YYYY-MM-DD HH:MM:SS",
// nonnegative integer counts. Missing 30-minute slots between the first and
// last row are kept as absent rows.
MobilitySeries ReadSeriesCsv(std::istream& in);
MobilitySeries LoadCsv(const std::string& path);
// Writes present rows only. Integral values are printed without a fraction.
void WriteSeriesCsv(std::ostream& out, const MobilitySeries& s);

// Quartile by linear interpolation between order statistics of sorted data
// (position p * (n - 1)).
double Quantile(std::vector<double> sorted_values, double p);

// Interquartile-range cleaning grouped by (week, region, time-of-day slot):
// values outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR] and absent slots are replaced
// by the mean of the group's in-fence values.
MobilitySeries IqrClean(const MobilitySeries& s);

// [sin, cos] of minute-of-day over 1440 and minute-of-week (Monday 00:00
// origin) over 10080.
Tensor CyclicalFeatures(Timestamp ts);

struct SplitResult {
  MobilitySeries train;
  MobilitySeries test;
};

// The final (train_days + test_days) days, split contiguously.
SplitResult Split(const MobilitySeries& s, int train_days = 65, int test_days = 7);

// Supervised one-step-ahead pairs. Each input step holds the R region
// counts followed by the 4 cyclical features of that step's timestamp.
struct WindowedDataset {
  Tensor inputs;   // n x lag x (R + 4)
  Tensor targets;  // n x R
  std::vector<Timestamp> target_times;
  std::size_t lag = 0;
  std::size_t num_regions = 0;

  std::size_t size() const { return target_times.size(); }
  std::size_t num_features() const { return num_regions + kCyclicalFeatures; }
  Tensor Window(std::size_t i) const;  // lag x (R + 4)
  Tensor Target(std::size_t i) const;  // R
};

// Without context: n = tau - lag. With context (whose last slot must
// immediately precede s), the last `lag` context slots are prepended so every
// slot of s is a target: n = tau.
WindowedDataset MakeWindows(const MobilitySeries& s, std::size_t lag = 6,
                            const MobilitySeries* context = nullptr);

// Per-column min-max scaling to [0, 1]; columns are the R + 4 input features,
// targets share the region columns.
class Scaler {
 public:
  static Scaler Fit(const WindowedDataset& train);

  WindowedDataset Apply(const WindowedDataset& d) const;
  double Apply(std::size_t column, double v) const;
  double Invert(std::size_t column, double v) const;
  // n x R region-count tensor back to the original scale.
  Tensor InvertTargets(const Tensor& scaled) const;

  const std::vector<double>& min() const { return min_; }
  const std::vector<double>& max() const { return max_; }

 private:
  std::vector<double> min_, max_;
  std::size_t num_regions_ = 0;
};

struct RegionStats {
  double min = 0, max = 0, mean = 0, std = 0, median = 0;
};

// Per-region statistics over every slot; std uses the n - 1 convention.
std::vector<RegionStats> DescriptiveStats(const MobilitySeries& s);
// Rows Min, Max, Mean, Std, Median; one column per region.
void WriteStatsCsv(std::ostream& out, const MobilitySeries& s,
                   const std::vector<RegionStats>& stats);

}  // namespace dpmob

#endif  // DPMOB_DATA_H_
