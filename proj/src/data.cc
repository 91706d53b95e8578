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

#include "dpmob/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <tuple>

#include <fmt/format.h>

#include "dpmob/errors.h"

namespace dpmob {
namespace {

using std::chrono::days;
using std::chrono::floor;
using std::chrono::minutes;
using std::chrono::sys_days;

int ParseInt(std::string_view s, std::string_view what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("bad " + std::string(what) + " in timestamp");
  }
  return v;
}

std::int64_t DaysSinceEpoch(Timestamp ts) {
  return floor<days>(ts).time_since_epoch().count();
}

// Monday-origin week index and minute-of-week.
std::int64_t WeekIndex(Timestamp ts) {
  const std::int64_t d = DaysSinceEpoch(ts) + 3;  // 1970-01-01 is a Thursday
  return d >= 0 ? d / 7 : (d - 6) / 7;
}

std::int64_t MinuteOfDay(Timestamp ts) {
  return (ts - floor<days>(ts)).count() / 60;
}

std::int64_t MinuteOfWeek(Timestamp ts) {
  const std::int64_t d = DaysSinceEpoch(ts) + 3;
  const std::int64_t dow = ((d % 7) + 7) % 7;
  return dow * 1440 + MinuteOfDay(ts);
}

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string FormatValue(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    return fmt::format("{}", static_cast<long long>(v));
  }
  return fmt::format("{}", v);
}

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

Timestamp ParseTimestamp(std::string_view text) {
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != ' ' ||
      text[13] != ':' || text[16] != ':') {
    throw InvalidArgument("timestamp '" + std::string(text) +
                          "' is not YYYY-MM-DD HH:MM:SS");
  }
  const int y = ParseInt(text.substr(0, 4), "year");
  const int mo = ParseInt(text.substr(5, 2), "month");
  const int d = ParseInt(text.substr(8, 2), "day");
  const int hh = ParseInt(text.substr(11, 2), "hour");
  const int mm = ParseInt(text.substr(14, 2), "minute");
  const int ss = ParseInt(text.substr(17, 2), "second");
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) {
    throw InvalidArgument("timestamp '" + std::string(text) + "' is out of range");
  }
  return sys_days{ymd} + std::chrono::hours{hh} + minutes{mm} + std::chrono::seconds{ss};
}

std::string FormatTimestamp(Timestamp ts) {
  const sys_days day = floor<days>(ts);
  const std::chrono::year_month_day ymd{day};
  const auto secs = (ts - day).count();
  return fmt::format("{:04d}-{:02d}-{:02d} {:02d}:{:02d}:{:02d}",
                     static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()), secs / 3600, (secs / 60) % 60,
                     secs % 60);
}

std::size_t ReadProbe::total() const {
  return std::accumulate(reads_.begin(), reads_.end(), std::size_t{0});
}

MobilitySeries::MobilitySeries(std::vector<Timestamp> timestamps, Tensor counts,
                               std::vector<std::string> regions,
                               std::vector<bool> present)
    : timestamps_(std::move(timestamps)),
      counts_(std::move(counts)),
      regions_(std::move(regions)),
      present_(std::move(present)) {
  if (present_.empty()) present_.assign(timestamps_.size(), true);
  if (counts_.shape() != Shape{timestamps_.size(), regions_.size()} ||
      present_.size() != timestamps_.size()) {
    throw InvalidArgument("series counts must be [timestamps x regions]");
  }
  for (std::size_t t = 1; t < timestamps_.size(); ++t) {
    if (timestamps_[t] - timestamps_[t - 1] != kSlotLength) {
      throw InvalidArgument("series timestamps must be consecutive 30-minute slots (at " +
                            FormatTimestamp(timestamps_[t]) + ")");
    }
  }
}

void MobilitySeries::RecordRead(std::size_t t) const {
  if (probe_) probe_->Record(probe_offset_ + t);
}

std::span<const double> MobilitySeries::row(std::size_t t) const {
  RecordRead(t);
  return counts_.row(t);
}

const Tensor& MobilitySeries::counts() const {
  for (std::size_t t = 0; t < length(); ++t) RecordRead(t);
  return counts_;
}

bool MobilitySeries::HasGaps() const {
  return std::find(present_.begin(), present_.end(), false) != present_.end();
}

MobilitySeries MobilitySeries::Slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > length()) throw InvalidArgument("slice out of range");
  const std::size_t r = num_regions();
  std::vector<double> vals(counts_.values().begin() + static_cast<std::ptrdiff_t>(begin * r),
                           counts_.values().begin() + static_cast<std::ptrdiff_t>(end * r));
  MobilitySeries out(
      std::vector<Timestamp>(timestamps_.begin() + static_cast<std::ptrdiff_t>(begin),
                             timestamps_.begin() + static_cast<std::ptrdiff_t>(end)),
      Tensor({end - begin, r}, std::move(vals)), regions_,
      std::vector<bool>(present_.begin() + static_cast<std::ptrdiff_t>(begin),
                        present_.begin() + static_cast<std::ptrdiff_t>(end)));
  out.privacy_ = privacy_;
  out.probe_ = probe_;
  out.probe_offset_ = probe_offset_ + begin;
  return out;
}

MobilitySeries MobilitySeries::WithCounts(Tensor counts) const {
  MobilitySeries out(timestamps_, std::move(counts), regions_);
  out.privacy_ = privacy_;
  return out;
}

void MobilitySeries::AttachProbe(std::shared_ptr<ReadProbe> probe) {
  if (probe && probe->rows() < length()) throw InvalidArgument("probe too small");
  probe_ = std::move(probe);
  probe_offset_ = 0;
}

MobilitySeries MobilitySeries::MakeSanitized(const MobilitySeries& shape_source,
                                             Tensor noisy_counts, PrivacyRecord record) {
  MobilitySeries out(shape_source.timestamps_, std::move(noisy_counts),
                     shape_source.regions_);
  out.privacy_ = std::move(record);
  return out;
}

MobilitySeries ReadSeriesCsv(std::istream& in) {
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line()) throw ParseError("empty file: missing header", 1);
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = SplitFields(line);
  if (header.size() < 2 || header[0] != "datetime") {
    throw ParseError("header must be 'datetime,R1,...'", line_no);
  }
  std::vector<std::string> regions(header.begin() + 1, header.end());
  const std::size_t r = regions.size();

  std::vector<std::pair<Timestamp, std::vector<double>>> rows;
  while (next_line()) {
    if (line.empty()) continue;
    const auto fields = SplitFields(line);
    if (fields.size() != r + 1) {
      throw ParseError("expected " + std::to_string(r + 1) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Timestamp ts;
    try {
      ts = ParseTimestamp(fields[0]);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), line_no);
    }
    std::vector<double> vals(r);
    for (std::size_t j = 0; j < r; ++j) {
      long long v = 0;
      const auto f = fields[j + 1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || f.empty() || v < 0) {
        throw ParseError("count '" + std::string(f) + "' is not a nonnegative integer",
                         line_no);
      }
      vals[j] = static_cast<double>(v);
    }
    if (!rows.empty()) {
      if (ts == rows.back().first) {
        throw ParseError("duplicate timestamp " + FormatTimestamp(ts), line_no);
      }
      if (ts < rows.back().first) {
        throw ParseError("timestamps not increasing at " + FormatTimestamp(ts), line_no);
      }
      if ((ts - rows.front().first) % kSlotLength != std::chrono::seconds{0}) {
        throw ParseError("timestamp " + FormatTimestamp(ts) + " is off the 30-minute grid",
                         line_no);
      }
    }
    rows.emplace_back(ts, std::move(vals));
  }
  if (rows.empty()) throw ParseError("no data rows", line_no);

  const Timestamp first = rows.front().first;
  const std::size_t tau =
      static_cast<std::size_t>((rows.back().first - first) / kSlotLength) + 1;
  std::vector<Timestamp> ts(tau);
  for (std::size_t t = 0; t < tau; ++t) ts[t] = first + kSlotLength * static_cast<int>(t);
  Tensor counts({tau, r});
  std::vector<bool> present(tau, false);
  for (auto& [stamp, vals] : rows) {
    const auto t = static_cast<std::size_t>((stamp - first) / kSlotLength);
    std::copy(vals.begin(), vals.end(), counts.row(t).begin());
    present[t] = true;
  }
  return MobilitySeries(std::move(ts), std::move(counts), std::move(regions),
                        std::move(present));
}

MobilitySeries LoadCsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  return ReadSeriesCsv(in);
}

void WriteSeriesCsv(std::ostream& out, const MobilitySeries& s) {
  out << "datetime";
  for (const auto& name : s.regions()) out << ',' << name;
  out << '\n';
  const Tensor& c = s.counts();
  for (std::size_t t = 0; t < s.length(); ++t) {
    if (!s.present(t)) continue;
    out << FormatTimestamp(s.timestamps()[t]);
    for (std::size_t j = 0; j < s.num_regions(); ++j) out << ',' << FormatValue(c.at(t, j));
    out << '\n';
  }
}

double Quantile(std::vector<double> sorted_values, double p) {
  if (sorted_values.empty()) throw InvalidArgument("quantile of empty data");
  std::sort(sorted_values.begin(), sorted_values.end());
  const double pos = p * static_cast<double>(sorted_values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted_values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

MobilitySeries IqrClean(const MobilitySeries& s) {
  const std::size_t tau = s.length(), nr = s.num_regions();
  const Tensor& raw = s.counts();
  Tensor out = raw;

  // (week, slot of day) -> row indices. Regions are handled independently.
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> groups;
  std::map<std::int64_t, std::vector<std::size_t>> weeks;
  for (std::size_t t = 0; t < tau; ++t) {
    const Timestamp ts = s.timestamps()[t];
    groups[{WeekIndex(ts), MinuteOfDay(ts)}].push_back(t);
    weeks[WeekIndex(ts)].push_back(t);
  }

  for (std::size_t r = 0; r < nr; ++r) {
    for (const auto& [key, rows] : groups) {
      std::vector<double> vals;
      for (std::size_t t : rows) {
        if (s.present(t)) vals.push_back(raw.at(t, r));
      }
      double lo_fence = 0.0, hi_fence = -1.0;
      std::vector<double> inside;
      if (!vals.empty()) {
        const double q1 = Quantile(vals, 0.25), q3 = Quantile(vals, 0.75);
        lo_fence = q1 - 1.5 * (q3 - q1);
        hi_fence = q3 + 1.5 * (q3 - q1);
        for (double v : vals) {
          if (v >= lo_fence && v <= hi_fence) inside.push_back(v);
        }
      }
      double fill;
      if (inside.size() >= 2) {
        fill = Mean(inside);
      } else {
        std::vector<double> week_vals;
        for (std::size_t t : weeks[key.first]) {
          if (s.present(t)) week_vals.push_back(raw.at(t, r));
        }
        if (week_vals.empty()) {
          throw RunFailed("region " + s.regions()[r] + " has no observations in the week of " +
                          FormatTimestamp(s.timestamps()[rows.front()]));
        }
        fill = Mean(week_vals);
        Warn(fmt::format("iqr_clean: fewer than 2 in-fence values for region {} at {}; "
                         "using the region's weekly mean",
                         s.regions()[r], FormatTimestamp(s.timestamps()[rows.front()])));
      }
      for (std::size_t t : rows) {
        const double v = raw.at(t, r);
        if (!s.present(t) || v < lo_fence || v > hi_fence) out.at(t, r) = fill;
      }
    }
  }
  return s.WithCounts(std::move(out));
}

Tensor CyclicalFeatures(Timestamp ts) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double day_phase = kTwoPi * static_cast<double>(MinuteOfDay(ts)) / 1440.0;
  const double week_phase = kTwoPi * static_cast<double>(MinuteOfWeek(ts)) / 10080.0;
  return Tensor::Vector({std::sin(day_phase), std::cos(day_phase), std::sin(week_phase),
                         std::cos(week_phase)});
}

SplitResult Split(const MobilitySeries& s, int train_days, int test_days) {
  if (train_days < 1 || test_days < 1) throw InvalidArgument("split days must be positive");
  const std::size_t need = static_cast<std::size_t>(train_days + test_days) * kSlotsPerDay;
  if (s.length() < need) {
    throw InvalidArgument(fmt::format(
        "split needs {} slots ({} days), series has {}", need, train_days + test_days,
        s.length()));
  }
  const std::size_t start = s.length() - need;
  const std::size_t cut = start + static_cast<std::size_t>(train_days) * kSlotsPerDay;
  return {s.Slice(start, cut), s.Slice(cut, s.length())};
}

Tensor WindowedDataset::Window(std::size_t i) const {
  const std::size_t stride = lag * num_features();
  auto v = inputs.values().subspan(i * stride, stride);
  return Tensor({lag, num_features()}, std::vector<double>(v.begin(), v.end()));
}

Tensor WindowedDataset::Target(std::size_t i) const {
  auto v = targets.row(i);
  return Tensor({num_regions}, std::vector<double>(v.begin(), v.end()));
}

WindowedDataset MakeWindows(const MobilitySeries& s, std::size_t lag,
                            const MobilitySeries* context) {
  if (lag == 0) throw InvalidArgument("lag must be at least 1");
  if (s.HasGaps()) throw InvalidArgument("series has absent slots; clean it first");

  // Concatenated sequence of (row, timestamp) references.
  std::vector<std::pair<const MobilitySeries*, std::size_t>> seq;
  std::size_t first_target = lag;
  if (context != nullptr) {
    if (context->length() < lag) throw InvalidArgument("context shorter than lag");
    if (context->num_regions() != s.num_regions()) {
      throw InvalidArgument("context has a different number of regions");
    }
    if (s.length() > 0 && context->timestamps().back() + kSlotLength != s.timestamps().front()) {
      throw InvalidArgument("context must end immediately before the series");
    }
    for (std::size_t t = context->length() - lag; t < context->length(); ++t) {
      seq.emplace_back(context, t);
    }
  }
  for (std::size_t t = 0; t < s.length(); ++t) seq.emplace_back(&s, t);
  if (seq.size() < lag + 1) {
    throw InvalidArgument(fmt::format("series of length {} is too short for lag {}",
                                      s.length(), lag));
  }

  const std::size_t nr = s.num_regions();
  const std::size_t nf = nr + kCyclicalFeatures;
  // Feature rows for every position, read once.
  std::vector<std::vector<double>> features(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto [series, t] = seq[i];
    auto counts = series->row(t);
    Tensor cyc = CyclicalFeatures(series->timestamps()[t]);
    features[i].assign(counts.begin(), counts.end());
    features[i].insert(features[i].end(), cyc.values().begin(), cyc.values().end());
  }

  const std::size_t n = seq.size() - first_target;
  WindowedDataset d;
  d.lag = lag;
  d.num_regions = nr;
  d.inputs = Tensor({n, lag, nf});
  d.targets = Tensor({n, nr});
  d.target_times.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* dst = d.inputs.data() + i * lag * nf;
    for (std::size_t k = 0; k < lag; ++k) {
      std::copy(features[i + k].begin(), features[i + k].end(), dst + k * nf);
    }
    const auto& tgt = features[i + lag];
    std::copy(tgt.begin(), tgt.begin() + static_cast<std::ptrdiff_t>(nr),
              d.targets.row(i).begin());
    const auto [series, t] = seq[i + lag];
    d.target_times.push_back(series->timestamps()[t]);
  }
  return d;
}

Scaler Scaler::Fit(const WindowedDataset& train) {
  if (train.size() == 0) throw InvalidArgument("cannot fit a scaler on an empty dataset");
  const std::size_t nf = train.num_features();
  Scaler sc;
  sc.num_regions_ = train.num_regions;
  sc.min_.assign(nf, std::numeric_limits<double>::infinity());
  sc.max_.assign(nf, -std::numeric_limits<double>::infinity());
  const double* in = train.inputs.data();
  for (std::size_t i = 0; i < train.size() * train.lag; ++i) {
    for (std::size_t c = 0; c < nf; ++c) {
      sc.min_[c] = std::min(sc.min_[c], in[i * nf + c]);
      sc.max_[c] = std::max(sc.max_[c], in[i * nf + c]);
    }
  }
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (std::size_t c = 0; c < train.num_regions; ++c) {
      sc.min_[c] = std::min(sc.min_[c], train.targets.at(i, c));
      sc.max_[c] = std::max(sc.max_[c], train.targets.at(i, c));
    }
  }
  for (std::size_t c = 0; c < nf; ++c) {
    if (sc.max_[c] == sc.min_[c]) {
      Warn(fmt::format("scaler: column {} is constant; mapping it to 0", c));
    }
  }
  return sc;
}

double Scaler::Apply(std::size_t column, double v) const {
  const double range = max_[column] - min_[column];
  return range > 0.0 ? (v - min_[column]) / range : 0.0;
}

double Scaler::Invert(std::size_t column, double v) const {
  return min_[column] + v * (max_[column] - min_[column]);
}

WindowedDataset Scaler::Apply(const WindowedDataset& d) const {
  if (d.num_features() != min_.size()) throw InvalidArgument("scaler column count mismatch");
  WindowedDataset out = d;
  const std::size_t nf = d.num_features();
  double* in = out.inputs.data();
  for (std::size_t i = 0; i < d.size() * d.lag; ++i) {
    for (std::size_t c = 0; c < nf; ++c) in[i * nf + c] = Apply(c, in[i * nf + c]);
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t c = 0; c < d.num_regions; ++c) {
      out.targets.at(i, c) = Apply(c, out.targets.at(i, c));
    }
  }
  return out;
}

Tensor Scaler::InvertTargets(const Tensor& scaled) const {
  if (scaled.rank() != 2 || scaled.dim(1) != num_regions_) {
    throw InvalidArgument("InvertTargets expects an n x R tensor");
  }
  Tensor out = scaled;
  for (std::size_t i = 0; i < out.dim(0); ++i) {
    for (std::size_t c = 0; c < num_regions_; ++c) out.at(i, c) = Invert(c, out.at(i, c));
  }
  return out;
}

std::vector<RegionStats> DescriptiveStats(const MobilitySeries& s) {
  if (s.length() == 0) throw InvalidArgument("statistics of an empty series");
  const Tensor& c = s.counts();
  std::vector<RegionStats> out(s.num_regions());
  for (std::size_t r = 0; r < s.num_regions(); ++r) {
    std::vector<double> v(s.length());
    for (std::size_t t = 0; t < s.length(); ++t) v[t] = c.at(t, r);
    RegionStats& st = out[r];
    st.min = *std::min_element(v.begin(), v.end());
    st.max = *std::max_element(v.begin(), v.end());
    st.mean = Mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - st.mean) * (x - st.mean);
    st.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    st.median = Quantile(v, 0.5);
  }
  return out;
}

void WriteStatsCsv(std::ostream& out, const MobilitySeries& s,
                   const std::vector<RegionStats>& stats) {
  out << "Statistic";
  for (const auto& name : s.regions()) out << ',' << name;
  out << '\n';
  const std::pair<const char*, double RegionStats::*> rows[] = {
      {"Min", &RegionStats::min},   {"Max", &RegionStats::max},
      {"Mean", &RegionStats::mean}, {"Std", &RegionStats::std},
      {"Median", &RegionStats::median}};
  for (const auto& [label, member] : rows) {
    out << label;
    for (const auto& st : stats) out << ',' << fmt::format("{:.1f}", st.*member);
    out << '\n';
  }
}

}  // namespace dpmob
