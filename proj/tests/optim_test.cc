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
#include <vector>

#include <gtest/gtest.h>

#include "dpmob/errors.h"
#include "dpmob/numeric.h"
#include "dpmob/optim.h"
#include "support/synthetic.h"

namespace dpmob {
namespace {

ModelSpec TinySpec(int h = 2, int d = 2, int out = 2) {
  ModelSpec s;
  s.cell = CellKind::kGru;
  s.bidirectional = false;
  s.hidden_size = h;
  s.input_size = d;
  s.output_size = out;
  s.activation = Activation::kTanh;
  return s;
}

GradientSet RandomGradient(const ModelSpec& spec, RngStream& rng, double scale) {
  GradientSet g = ModelParams::Zeros(spec);
  for (auto& [name, t] : g.Named()) {
    for (double& v : t->values()) v = scale * rng.Normal();
  }
  return g;
}

TEST(ClipToNormTest, ScalesDownLargeGradients) {
  GradientSet g = ModelParams::Zeros(TinySpec(1, 1, 2));
  g.dense_b = Tensor::Vector({3.0, 4.0});
  const GradientSet c = ClipToNorm(g, 2.0);
  EXPECT_DOUBLE_EQ(c.dense_b[0], 1.2);
  EXPECT_DOUBLE_EQ(c.dense_b[1], 1.6);
  EXPECT_NEAR(GlobalNorm(c), 2.0, 1e-12);
}

TEST(ClipToNormTest, LeavesSmallGradientsAlone) {
  GradientSet g = ModelParams::Zeros(TinySpec(1, 1, 2));
  g.dense_b = Tensor::Vector({0.6, 0.8});
  EXPECT_EQ(ClipToNorm(g, 2.0).dense_b, g.dense_b);
  EXPECT_THROW(ClipToNorm(g, 0.0), InvalidArgument);
}

TEST(ClipToNormTest, PostNormIsMinOfOneAndPreNorm) {
  RngStream rng(21, 0);
  const ModelSpec spec = TinySpec(3, 2, 2);
  for (int i = 0; i < 50; ++i) {
    const GradientSet g = RandomGradient(spec, rng, 0.05 + 0.2 * rng.Uniform());
    const double pre = GlobalNorm(g);
    const double post = GlobalNorm(ClipToNorm(g, 1.0));
    EXPECT_NEAR(post, std::min(1.0, pre), 1e-12);
    EXPECT_LE(post, 1.0 + 1e-9);
  }
}

TEST(DpAggregateTest, NoNoiseNoClipIsPlainMean) {
  RngStream rng(1, 0);
  const ModelSpec spec = TinySpec();
  std::vector<GradientSet> gs;
  for (int i = 0; i < 4; ++i) gs.push_back(RandomGradient(spec, rng, 0.1));
  const GradientSet out = DpAggregate(gs, 1e9, 0.0, rng);
  const auto o = out.Named();
  for (std::size_t t = 0; t < o.size(); ++t) {
    for (std::size_t k = 0; k < o[t].second->size(); ++k) {
      double mean = 0.0;
      for (const GradientSet& g : gs) mean += (*g.Named()[t].second)[k];
      EXPECT_NEAR((*o[t].second)[k], mean / 4.0, 1e-12);
    }
  }
}

TEST(DpAggregateTest, OppositeGradientsCancel) {
  RngStream rng(2, 0);
  const ModelSpec spec = TinySpec();
  GradientSet v = RandomGradient(spec, rng, 0.1);
  GradientSet neg = v;
  Scale(neg, -1.0);
  const std::vector<GradientSet> gs = {v, neg};
  EXPECT_EQ(GlobalNorm(DpAggregate(gs, 10.0, 0.0, rng)), 0.0);
}

TEST(DpAggregateTest, NoiseVarianceSingleMicrobatch) {
  const ModelSpec spec = TinySpec(4, 4, 4);
  RngStream rng(3, 0);
  const std::vector<GradientSet> zero = {ModelParams::Zeros(spec)};
  double ss = 0.0;
  std::size_t count = 0;
  while (count < 100000) {
    const GradientSet noisy = DpAggregate(zero, 2.0, 1.0, rng);
    for (const auto& [name, t] : noisy.Named()) {
      for (double v : t->values()) {
        ss += v * v;
        ++count;
      }
    }
  }
  EXPECT_NEAR(ss / static_cast<double>(count), 4.0, 0.08);
}

TEST(DpAggregateTest, NoiseStdIsSigmaClipOverMicrobatches) {
  const ModelSpec spec = TinySpec(4, 4, 4);
  RngStream rng(4, 0);
  const std::vector<GradientSet> zero(4, ModelParams::Zeros(spec));
  double ss = 0.0;
  std::size_t count = 0;
  while (count < 100000) {
    const GradientSet noisy = DpAggregate(zero, 2.0, 1.5, rng);
    for (const auto& [name, t] : noisy.Named()) {
      for (double v : t->values()) {
        ss += v * v;
        ++count;
      }
    }
  }
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(count)), 1.5 * 2.0 / 4.0, 0.02 * 0.75);
}

TEST(DpAggregateTest, ShapeMismatchRejected) {
  RngStream rng(5, 0);
  const std::vector<GradientSet> gs = {ModelParams::Zeros(TinySpec(2, 2, 2)),
                                       ModelParams::Zeros(TinySpec(3, 2, 2))};
  EXPECT_THROW(DpAggregate(gs, 1.0, 1.0, rng), InvalidArgument);
}

TEST(AdamStepTest, ZeroGradientKeepsParameters) {
  const ModelSpec spec = TinySpec();
  RngStream rng(6, 0);
  const ModelParams p = InitParams(spec, rng);
  AdamState s = AdamState::Fresh(p);
  const ModelParams q = AdamStep(p, ZerosLike(p), s, 0.1);
  const auto a = p.Named();
  const auto b = q.Named();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].second, *b[i].second);
  EXPECT_EQ(s.step, 1);
}

TEST(AdamStepTest, FirstStepOfUnitGradient) {
  const ModelSpec spec = TinySpec(1, 1, 1);
  const ModelParams p = ModelParams::Zeros(spec);
  GradientSet g = ZerosLike(p);
  g.dense_b[0] = 1.0;
  AdamState s = AdamState::Fresh(p);
  const ModelParams q = AdamStep(p, g, s, 0.1);
  // m_hat = v_hat = 1 after bias correction.
  EXPECT_NEAR(q.dense_b[0], -0.1 / (1.0 + 1e-7), 1e-15);
  EXPECT_NE(q.revision, p.revision);
}

TEST(AdamStepTest, Deterministic) {
  const ModelSpec spec = TinySpec();
  RngStream rng(7, 0);
  const ModelParams p = InitParams(spec, rng);
  const GradientSet g = RandomGradient(spec, rng, 1.0);
  AdamState s1 = AdamState::Fresh(p), s2 = AdamState::Fresh(p);
  const ModelParams a = AdamStep(p, g, s1, 0.01);
  const ModelParams b = AdamStep(p, g, s2, 0.01);
  for (std::size_t i = 0; i < a.Named().size(); ++i) {
    EXPECT_EQ(*a.Named()[i].second, *b.Named()[i].second);
  }
}

TEST(DpSgdConfigTest, MicrobatchesMustDivideBatch) {
  DpSgdConfig c;
  c.batch_size = 10;
  c.num_microbatches = 4;
  EXPECT_THROW(c.Validate(), InvalidArgument);
  c.num_microbatches = 5;
  EXPECT_NO_THROW(c.Validate());
}

struct Toy {
  ModelSpec spec;
  WindowedDataset data;
};

Toy MakeToy(int days = 3) {
  testing::SyntheticOptions o;
  o.days = days;
  o.regions = 1;
  const MobilitySeries s = testing::SyntheticMobility(o);
  Toy t;
  t.data = MakeWindows(s, 3);
  t.data = Scaler::Fit(t.data).Apply(t.data);
  t.spec = TinySpec(3, 5, 1);
  return t;
}

TEST(TrainTest, ZeroEpochsReturnsInitialParameters) {
  const Toy toy = MakeToy();
  RngStream init(1, 0), rng(1, 1);
  const ModelParams p0 = InitParams(toy.spec, init);
  const TrainResult r = Train(toy.spec, p0, toy.data, NonPrivateConfig{5, 0, 1e-3}, rng);
  for (std::size_t i = 0; i < p0.Named().size(); ++i) {
    EXPECT_EQ(*p0.Named()[i].second, *r.params.Named()[i].second);
  }
  EXPECT_EQ(r.log.total_steps, 0);
}

TEST(TrainTest, StepCountIsEpochsTimesFullBatches) {
  const Toy toy = MakeToy();
  RngStream init(2, 0), rng(2, 1);
  const ModelParams p0 = InitParams(toy.spec, init);
  const std::size_t n = toy.data.size();
  ASSERT_EQ(n, 3u * 48u - 3u);
  DpSgdConfig dp;
  dp.batch_size = 10;
  dp.num_microbatches = 5;
  dp.epochs = 3;
  dp.noise_multiplier = 1.0;
  const TrainResult r = Train(toy.spec, p0, toy.data, dp, rng);
  EXPECT_EQ(r.log.total_steps, 3 * static_cast<std::int64_t>(n / 10));
  EXPECT_EQ(r.log.total_steps, ExpectedSteps(static_cast<std::int64_t>(n), 10, 3));
  ASSERT_EQ(r.log.epochs.size(), 3u);
  EXPECT_EQ(r.log.epochs.back().step_count, r.log.total_steps);
}

TEST(TrainTest, TrainingLossDecreasesOnSmoothSeries) {
  const Toy toy = MakeToy(6);
  RngStream init(3, 0), rng(3, 1);
  const ModelParams p0 = InitParams(toy.spec, init);
  const TrainResult r = Train(toy.spec, p0, toy.data, NonPrivateConfig{5, 5, 3e-3}, rng);
  for (std::size_t e = 1; e < r.log.epochs.size(); ++e) {
    EXPECT_LT(r.log.epochs[e].train_mae, r.log.epochs[e - 1].train_mae) << "epoch " << e + 1;
  }
}

TEST(TrainTest, NoiselessUnclippedDpMatchesPlainAdam) {
  const Toy toy = MakeToy();
  RngStream init(4, 0);
  const ModelParams p0 = InitParams(toy.spec, init);
  std::vector<ModelParams> plain, dp;
  RngStream r1(4, 1), r2(4, 1);
  Train(toy.spec, p0, toy.data, NonPrivateConfig{5, 2, 1e-3}, r1,
        [&](std::int64_t step, const ModelParams& p) {
          if (step <= 50) plain.push_back(p);
        });
  DpSgdConfig cfg;
  cfg.batch_size = 5;
  cfg.num_microbatches = 5;
  cfg.epochs = 2;
  cfg.learning_rate = 1e-3;
  cfg.l2_norm_clip = 1e9;
  cfg.noise_multiplier = 0.0;
  Train(toy.spec, p0, toy.data, cfg, r2, [&](std::int64_t step, const ModelParams& p) {
    if (step <= 50) dp.push_back(p);
  });
  ASSERT_EQ(plain.size(), 50u);
  ASSERT_EQ(dp.size(), 50u);
  double worst = 0.0;
  for (std::size_t s = 0; s < 50; ++s) {
    const auto a = plain[s].Named();
    const auto b = dp[s].Named();
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t k = 0; k < a[i].second->size(); ++k) {
        worst = std::max(worst, std::abs((*a[i].second)[k] - (*b[i].second)[k]));
      }
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(TrainTest, NonFiniteLossReportsEpoch) {
  Toy toy = MakeToy();
  toy.data.inputs[7] = std::nan("");
  RngStream init(5, 0), rng(5, 1);
  const ModelParams p0 = InitParams(toy.spec, init);
  try {
    Train(toy.spec, p0, toy.data, NonPrivateConfig{5, 2, 1e-3}, rng);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
}

TEST(TrainTest, RejectsOversizedBatch) {
  const Toy toy = MakeToy();
  RngStream init(6, 0), rng(6, 1);
  const ModelParams p0 = InitParams(toy.spec, init);
  EXPECT_THROW(Train(toy.spec, p0, toy.data, NonPrivateConfig{100000, 1, 1e-3}, rng),
               InvalidArgument);
}

TEST(TrainLogTest, CsvColumns) {
  TrainLog log;
  log.epochs = {{1, 10, 0.5}, {2, 20, 0.25}};
  std::ostringstream out;
  log.WriteCsv(out);
  EXPECT_EQ(out.str(), "epoch,step_count,train_mae\n1,10,0.5\n2,20,0.25\n");
}

}  // namespace
}  // namespace dpmob
