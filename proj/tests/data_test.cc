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

#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "dpmob/data.h"
#include "dpmob/errors.h"
#include "support/synthetic.h"

namespace dpmob {
namespace {

MobilitySeries Parse(const std::string& text) {
  std::istringstream in(text);
  return ReadSeriesCsv(in);
}

int ParseErrorLine(const std::string& text) {
  try {
    Parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

TEST(ReadSeriesCsvTest, TwoRows) {
  const MobilitySeries s = Parse(
      "datetime,R1,R2\n2020-09-07 00:00:00,10,20\n2020-09-07 00:30:00,11,21\n");
  EXPECT_EQ(s.length(), 2u);
  EXPECT_EQ(s.num_regions(), 2u);
  EXPECT_EQ(s.value(1, 1), 21.0);
  EXPECT_FALSE(s.HasGaps());
}

TEST(ReadSeriesCsvTest, CrlfAndByteOrderMark) {
  const MobilitySeries s = Parse(
      "\xEF\xBB\xBF" "datetime,R1\r\n2020-09-07 00:00:00,5\r\n2020-09-07 00:30:00,6\r\n");
  EXPECT_EQ(s.length(), 2u);
  EXPECT_EQ(s.regions()[0], "R1");
}

TEST(ReadSeriesCsvTest, DuplicateTimestampNamed) {
  const std::string text =
      "datetime,R1\n2020-09-07 00:00:00,5\n2020-09-07 00:00:00,6\n";
  try {
    Parse(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("2020-09-07 00:00:00"), std::string::npos);
  }
}

TEST(ReadSeriesCsvTest, MalformedInputsCarryLineNumbers) {
  EXPECT_EQ(ParseErrorLine(""), 1);
  EXPECT_EQ(ParseErrorLine("time,R1\n"), 1);
  EXPECT_EQ(ParseErrorLine("datetime,R1\n2020-09-07 00:30:00,5\n2020-09-07 00:00:00,6\n"), 3);
  EXPECT_EQ(ParseErrorLine("datetime,R1,R2\n2020-09-07 00:00:00,5\n"), 2);
  EXPECT_EQ(ParseErrorLine("datetime,R1\n2020-09-07 00:00:00,-5\n"), 2);
  EXPECT_EQ(ParseErrorLine("datetime,R1\n2020-09-07 00:00:00,2.5\n"), 2);
  EXPECT_EQ(ParseErrorLine("datetime,R1\n2020-09-07 00:00:00,5\n2020-09-07 00:40:00,5\n"), 3);
  EXPECT_EQ(ParseErrorLine("datetime,R1\nyesterday,5\n"), 2);
}

TEST(ReadSeriesCsvTest, GapsBecomeAbsentRows) {
  const MobilitySeries s = Parse(
      "datetime,R1\n2020-09-07 00:00:00,5\n2020-09-07 01:30:00,6\n");
  EXPECT_EQ(s.length(), 4u);
  EXPECT_TRUE(s.HasGaps());
  EXPECT_FALSE(s.present(1));
  EXPECT_TRUE(s.present(3));
}

TEST(ReadSeriesCsvTest, SeventyTwoDayRoundTrip) {
  testing::SyntheticOptions o;
  o.days = 72;
  o.regions = 6;
  const MobilitySeries s = testing::SyntheticMobility(o);
  const MobilitySeries back = Parse(testing::ToCsv(s));
  EXPECT_EQ(back.length(), 3456u);
  EXPECT_EQ(back.counts(), s.counts());
  EXPECT_EQ(back.regions(), s.regions());
}

TEST(QuantileTest, LinearInterpolation) {
  EXPECT_EQ(Quantile({10, 11, 12, 13, 100}, 0.25), 11.0);
  EXPECT_EQ(Quantile({10, 11, 12, 13, 100}, 0.75), 13.0);
  EXPECT_EQ(Quantile({4, 6}, 0.25), 4.5);
  EXPECT_EQ(Quantile({1, 2, 3, 4}, 0.5), 2.5);
}

// One region, first slot of each day set from `first_slot`; every other slot 1.
std::string DailyFirstSlotCsv(const std::vector<std::string>& first_slot) {
  std::string csv = "datetime,R1\n";
  const Timestamp start = ParseTimestamp("2020-09-07 00:00:00");
  for (std::size_t d = 0; d < first_slot.size(); ++d) {
    for (int k = 0; k < kSlotsPerDay; ++k) {
      const Timestamp ts = start + std::chrono::hours(24 * d) + kSlotLength * k;
      if (k == 0) {
        if (!first_slot[d].empty()) csv += FormatTimestamp(ts) + "," + first_slot[d] + "\n";
      } else {
        csv += FormatTimestamp(ts) + ",1\n";
      }
    }
  }
  return csv;
}

TEST(IqrCleanTest, ReplacesOutlierWithInFenceMean) {
  const MobilitySeries s = Parse(DailyFirstSlotCsv({"10", "11", "12", "13", "100"}));
  const MobilitySeries c = IqrClean(s);
  EXPECT_EQ(c.value(4 * kSlotsPerDay, 0), 11.5);
  for (int d = 0; d < 4; ++d) EXPECT_EQ(c.value(d * kSlotsPerDay, 0), 10.0 + d);
  EXPECT_EQ(c.value(5, 0), 1.0);
}

TEST(IqrCleanTest, FillsMissingSlotWithGroupMean) {
  const MobilitySeries g = Parse(DailyFirstSlotCsv({"4", "", "6"}));
  ASSERT_TRUE(g.HasGaps());
  const MobilitySeries c = IqrClean(g);
  EXPECT_EQ(c.value(kSlotsPerDay, 0), 5.0);
  EXPECT_FALSE(c.HasGaps());
}

TEST(IqrCleanTest, CleanGroupsUnchangedAndIdempotent) {
  testing::SyntheticOptions o;
  o.days = 21;
  o.regions = 3;
  MobilitySeries s = testing::SyntheticMobility(o);
  const MobilitySeries once = IqrClean(s);
  Tensor spiked = s.counts();
  spiked.at(100, 1) *= 50.0;
  spiked.at(700, 2) = 0.0;
  const MobilitySeries dirty = s.WithCounts(spiked);
  const MobilitySeries cleaned = IqrClean(dirty);
  EXPECT_LT(cleaned.value(100, 1), 10.0 * s.value(100, 1));
  EXPECT_EQ(IqrClean(cleaned).counts(), cleaned.counts());
  EXPECT_EQ(IqrClean(once).counts(), once.counts());
}

int g_warnings = 0;
void CountWarning(const std::string&) { ++g_warnings; }

TEST(IqrCleanTest, SparseGroupFallsBackToWeeklyMeanWithWarning) {
  g_warnings = 0;
  const WarningSink prev = SetWarningSink(&CountWarning);
  const MobilitySeries s = Parse(DailyFirstSlotCsv({"9", ""}));
  const MobilitySeries c = IqrClean(s);
  SetWarningSink(prev);
  EXPECT_GT(g_warnings, 0);
  EXPECT_EQ(c.value(0, 0), 9.0);
  // Weekly mean of the present values: one 9 plus 94 ones.
  EXPECT_NEAR(c.value(kSlotsPerDay, 0), (9.0 + 94.0) / 95.0, 1e-12);
}

TEST(CyclicalFeaturesTest, KnownPhases) {
  const Tensor monday = CyclicalFeatures(ParseTimestamp("2020-09-07 00:00:00"));
  EXPECT_EQ(monday, Tensor::Vector({0.0, 1.0, 0.0, 1.0}));
  const Tensor six = CyclicalFeatures(ParseTimestamp("2020-09-09 06:00:00"));
  EXPECT_NEAR(six[0], 1.0, 1e-15);
  EXPECT_NEAR(six[1], 0.0, 1e-15);
  const Tensor thursday = CyclicalFeatures(ParseTimestamp("2020-09-10 12:00:00"));
  EXPECT_NEAR(thursday[2], 0.0, 1e-15);
  EXPECT_NEAR(thursday[3], -1.0, 1e-15);
}

TEST(CyclicalFeaturesTest, WeeklyPeriodicityIsExact) {
  Timestamp ts = ParseTimestamp("2020-04-20 00:00:00");
  for (int i = 0; i < 7 * kSlotsPerDay; i += 7) {
    const Timestamp t = ts + kSlotLength * i;
    EXPECT_EQ(CyclicalFeatures(t), CyclicalFeatures(t + std::chrono::hours(24 * 7)));
  }
}

TEST(SplitTest, SeventyTwoDayShape) {
  testing::SyntheticOptions o;
  o.days = 75;
  const MobilitySeries s = testing::SyntheticMobility(o);
  const SplitResult r = Split(s);
  EXPECT_EQ(r.train.length(), 3120u);
  EXPECT_EQ(r.test.length(), 336u);
  EXPECT_EQ(r.test.timestamps().back(), s.timestamps().back());
  EXPECT_EQ(r.train.timestamps().back() + kSlotLength, r.test.timestamps().front());
  EXPECT_EQ(r.train.timestamps().front(), s.timestamps()[3 * kSlotsPerDay]);
}

TEST(SplitTest, TooShortAndMinimal) {
  testing::SyntheticOptions o;
  o.days = 10;
  EXPECT_THROW(Split(testing::SyntheticMobility(o)), InvalidArgument);
  o.days = 2;
  const SplitResult r = Split(testing::SyntheticMobility(o), 1, 1);
  EXPECT_EQ(r.train.length(), 48u);
  EXPECT_EQ(r.test.length(), 48u);
}

TEST(MakeWindowsTest, CountsAndContext) {
  testing::SyntheticOptions o;
  o.days = 72;
  o.regions = 6;
  const SplitResult r = Split(testing::SyntheticMobility(o));
  const WindowedDataset train = MakeWindows(r.train, 6);
  EXPECT_EQ(train.size(), 3114u);
  EXPECT_EQ(train.inputs.shape(), (Shape{3114, 6, 10}));
  const WindowedDataset test = MakeWindows(r.test, 6, &r.train);
  EXPECT_EQ(test.size(), 336u);
  EXPECT_EQ(test.target_times.front(), r.test.timestamps().front());
  EXPECT_EQ(test.Window(0).at(5, 2), r.train.value(3119, 2));
  EXPECT_THROW(MakeWindows(r.train, 0), InvalidArgument);
}

TEST(MakeWindowsTest, FlatteningRecoversSeriesAndNoLeakage) {
  testing::SyntheticOptions o;
  o.days = 2;
  o.regions = 3;
  const MobilitySeries s = testing::SyntheticMobility(o);
  const WindowedDataset d = MakeWindows(s, 4);
  ASSERT_EQ(d.size(), s.length() - 4);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Tensor w = d.Window(i);
    for (std::size_t j = 0; j < 4; ++j) {
      for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(w.at(j, r), s.value(i + j, r));
      const Tensor f = CyclicalFeatures(s.timestamps()[i + j]);
      for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(w.at(j, 3 + k), f[k]);
      EXPECT_LT(s.timestamps()[i + j], d.target_times[i]);
    }
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(d.Target(i)[r], s.value(i + 4, r));
  }
}

TEST(MakeWindowsTest, TooShortRejected) {
  testing::SyntheticOptions o;
  o.days = 1;
  const MobilitySeries s = testing::SyntheticMobility(o).Slice(0, 5);
  EXPECT_THROW(MakeWindows(s, 6), InvalidArgument);
}

WindowedDataset RampDataset() {
  const MobilitySeries s = Parse(
      "datetime,R1\n2020-09-07 00:00:00,0\n2020-09-07 00:30:00,50\n"
      "2020-09-07 01:00:00,100\n");
  return MakeWindows(s, 1);
}

TEST(ScalerTest, MinMaxAndInverse) {
  const Scaler sc = Scaler::Fit(RampDataset());
  EXPECT_EQ(sc.Apply(0, 0.0), 0.0);
  EXPECT_EQ(sc.Apply(0, 50.0), 0.5);
  EXPECT_EQ(sc.Apply(0, 100.0), 1.0);
  EXPECT_EQ(sc.Apply(0, 200.0), 2.0);
  for (double v : {-3.0, 0.1, 17.25, 99.0, 1234.5}) {
    EXPECT_NEAR(sc.Invert(0, sc.Apply(0, v)), v, 1e-12 * std::max(1.0, std::abs(v)));
  }
}

TEST(ScalerTest, ConstantColumnMapsToZeroWithWarning) {
  g_warnings = 0;
  const WarningSink prev = SetWarningSink(&CountWarning);
  const MobilitySeries s = Parse(
      "datetime,R1\n2020-09-07 00:00:00,7\n2020-09-07 00:30:00,7\n2020-09-07 01:00:00,7\n");
  const Scaler sc = Scaler::Fit(MakeWindows(s, 1));
  SetWarningSink(prev);
  EXPECT_GT(g_warnings, 0);
  EXPECT_EQ(sc.Apply(0, 7.0), 0.0);
}

TEST(DescriptiveStatsTest, ConstantAndKnownValues) {
  const MobilitySeries s = Parse(
      "datetime,R1,R2\n2020-09-07 00:00:00,4,1\n2020-09-07 00:30:00,4,2\n"
      "2020-09-07 01:00:00,4,6\n");
  const auto st = DescriptiveStats(s);
  EXPECT_EQ(st[0].std, 0.0);
  EXPECT_EQ(st[0].min, 4.0);
  EXPECT_EQ(st[0].median, 4.0);
  EXPECT_EQ(st[0].mean, 4.0);
  EXPECT_EQ(st[1].mean, 3.0);
  EXPECT_EQ(st[1].median, 2.0);
  EXPECT_NEAR(st[1].std, std::sqrt(7.0), 1e-12);
  std::ostringstream out;
  WriteStatsCsv(out, s, st);
  EXPECT_EQ(out.str(),
            "Statistic,R1,R2\nMin,4.0,1.0\nMax,4.0,6.0\nMean,4.0,3.0\nStd,0.0,2.6\n"
            "Median,4.0,2.0\n");
}

TEST(ReadProbeTest, CountsRowReadsThroughSlices) {
  testing::SyntheticOptions o;
  o.days = 1;
  MobilitySeries s = testing::SyntheticMobility(o);
  auto probe = std::make_shared<ReadProbe>(s.length());
  s.AttachProbe(probe);
  s.value(3, 0);
  s.Slice(10, 20).row(2);
  EXPECT_EQ(probe->reads(3), 1u);
  EXPECT_EQ(probe->reads(12), 1u);
  EXPECT_EQ(probe->total(), 2u);
}

}  // namespace
}  // namespace dpmob
