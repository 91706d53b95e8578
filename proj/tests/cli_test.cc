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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "dpmob/cli.h"
#include "support/synthetic.h"

namespace dpmob {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult Invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "dpmob");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string SmallDataset(const std::string& name) {
  testing::SyntheticOptions o;
  o.days = 5;
  o.regions = 2;
  return testing::WriteTempFile(name, testing::ToCsv(testing::SyntheticMobility(o)));
}

std::string WriteConfig(const std::string& name, const std::string& dataset,
                        const std::string& extra) {
  return testing::WriteTempFile(
      name, "[data]\npath = " + dataset +
                "\nlag = 3\ntrain_days = 3\ntest_days = 1\n"
                "[model]\ncell = gru\nh1 = 4\n"
                "[train]\nbatch = 8\nepochs = 1\n"
                "[run]\nseeds = 2\n" +
                extra);
}

TEST(CliTest, HelpAndVersion) {
  EXPECT_EQ(Invoke({"--help"}).code, kExitOk);
  const CliResult v = Invoke({"--version"});
  EXPECT_EQ(v.code, kExitOk);
  EXPECT_NE(v.out.find(Version()), std::string::npos);
}

TEST(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(Invoke({}).code, kExitUsage);
  EXPECT_EQ(Invoke({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(Invoke({"stats", "--config", "/nonexistent/x.ini"}).code, kExitUsage);
}

TEST(CliTest, EmptyDatasetExitsTwo) {
  const std::string data = testing::WriteTempFile("cli_empty.csv", "");
  const std::string cfg = WriteConfig("cli_empty.ini", data, "");
  const CliResult r = Invoke({"stats", "--config", cfg});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(CliTest, SanitizeOutsideValidityExitsTwo) {
  const std::string cfg = WriteConfig("cli_eps.ini", SmallDataset("cli_eps.csv"),
                                      "[privacy]\nepsilon = 1.5\n");
  const std::string out = testing::MakeTempDir("cli_eps_out");
  const CliResult r = Invoke({"sanitize", "--config", cfg, "--out", out});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_FALSE(fs::exists(fs::path(out) / "sanitized.csv"));
}

TEST(CliTest, AccountantPrintsEpsilonAndOrder) {
  const CliResult r = Invoke({"accountant", "--batch", "5", "--n", "3120", "--noise-multiplier",
                           "35", "--steps", "62400", "--delta", "1e-7"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("eps=0.0650", 0), 0u) << r.out;
  EXPECT_NE(r.out.find("order=512"), std::string::npos);
  EXPECT_EQ(Invoke({"accountant", "--q", "0.01", "--noise-multiplier", "1", "--steps", "10",
                 "--delta", "1"})
                .code,
            kExitUsage);
  EXPECT_EQ(Invoke({"accountant", "--q", "0.01", "--steps", "10", "--delta", "1e-5"}).code,
            kExitUsage);
}

TEST(CliTest, AccountantZeroStepsWarns) {
  const CliResult r = Invoke({"accountant", "--q", "0.01", "--noise-multiplier", "1", "--steps",
                           "0", "--delta", "1e-7"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_FALSE(r.err.empty());
}

TEST(CliTest, StatsOfConstantSeriesHasZeroStd) {
  std::string csv = "datetime,R1,R2\n";
  for (int i = 0; i < 4; ++i) {
    csv += "2020-09-07 0" + std::to_string(i / 2) + (i % 2 ? ":30" : ":00") + ":00,5,5\n";
  }
  const std::string cfg =
      WriteConfig("cli_const.ini", testing::WriteTempFile("cli_const.csv", csv), "");
  const CliResult r = Invoke({"stats", "--config", cfg});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("\nStd,0.0,0.0\n"), std::string::npos) << r.out;
}

TEST(CliTest, TrainIsReproducibleAndWritesManifest) {
  const std::string data = SmallDataset("cli_train.csv");
  const std::string cfg = WriteConfig("cli_train.ini", data, "");
  const fs::path a = testing::MakeTempDir("cli_train_a");
  const fs::path b = testing::MakeTempDir("cli_train_b");
  ASSERT_EQ(Invoke({"train", "--config", cfg, "--out", a.string()}).code, kExitOk);
  ASSERT_EQ(Invoke({"--jobs", "2", "train", "--config", cfg, "--out", b.string()}).code, kExitOk);
  for (const char* f : {"metrics.csv", "predictions.csv", "trainlog.csv", "model.bin"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
  }
  const auto m = nlohmann::json::parse(Slurp(a / "manifest.json"));
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["version"], Version());
  EXPECT_EQ(m["seeds"].size(), 2u);
  EXPECT_EQ(m["inputs"][0]["sha256"].get<std::string>().size(), 64u);
  EXPECT_GE(m["outputs"].size(), 4u);
  EXPECT_EQ(m["config"], Slurp(cfg));
}

void SetKind(const std::string& cfg, const std::string& kind) {
  std::string text = Slurp(cfg);
  text.replace(text.find("[train]\n"), 8, "[train]\nkind = " + kind + "\n");
  std::ofstream(cfg) << text;
}

int CountDataRows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  return rows;
}

std::string MeanRow(const fs::path& metrics) {
  std::ifstream in(metrics);
  for (std::string line; std::getline(in, line);) {
    const auto at = line.find("Mean,");
    if (at != std::string::npos) return line.substr(at);
  }
  return "";
}

TEST(CliTest, GpTrainWritesOneLedgerRowPerTrainingSample) {
  const std::string cfg = WriteConfig("cli_gp.ini", SmallDataset("cli_gp.csv"),
                                      "[dp]\nnoise_multiplier = 2\n");
  SetKind(cfg, "gradient-perturbation");
  const fs::path out = testing::MakeTempDir("cli_gp_out");
  const CliResult r = Invoke({"train", "--config", cfg, "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(CountDataRows(out / "ledger.csv"), 3 * 48);
  EXPECT_NE(r.out.find("eps_total="), std::string::npos);
}

TEST(CliTest, IpTrainAndEvaluate) {
  const std::string data = SmallDataset("cli_ip.csv");
  const std::string cfg =
      WriteConfig("cli_ip.ini", data, "[privacy]\nepsilon = 0.5\nnoise_seed = 3\n");
  SetKind(cfg, "input-perturbation");
  const fs::path out = testing::MakeTempDir("cli_ip_out");
  ASSERT_EQ(Invoke({"train", "--config", cfg, "--out", out.string()}).code, kExitOk);
  const fs::path eval = testing::MakeTempDir("cli_ip_eval");
  const CliResult r = Invoke({"evaluate", "--config", cfg, "--out", eval.string(), "--model",
                           (out / "model.bin").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(MeanRow(eval / "metrics.csv"), MeanRow(out / "metrics.csv"));
  EXPECT_EQ(CountDataRows(out / "ledger.csv"), 3 * 48);
}

TEST(CliTest, TuneWritesOneRowPerTrial) {
  const std::string cfg = WriteConfig("cli_tune.ini", SmallDataset("cli_tune.csv"),
                                      "[tune]\nbudget = 3\n");
  const fs::path out = testing::MakeTempDir("cli_tune_out");
  const CliResult r = Invoke({"tune", "--config", cfg, "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(CountDataRows(out / "trials.csv"), 3);
  const auto s = nlohmann::json::parse(Slurp(out / "summary.json"));
  EXPECT_TRUE(s.is_object());
}

TEST(CliTest, ReportRecomputesUtilityLoss) {
  const fs::path ref = testing::MakeTempDir("cli_report_ref");
  const fs::path dp = testing::MakeTempDir("cli_report_dp");
  std::ofstream(ref / "summary.json")
      << R"({"run_kind":"non-private","metrics":{"mean_rmse":1214.3,"mean_mae":800}})";
  std::ofstream(dp / "summary.json")
      << R"({"run_kind":"gradient-perturbation","metrics":{"mean_rmse":1221.2,"mean_mae":820},)"
      << R"("privacy":{"epsilon":0.065,"epsilon_total":202.8}})";
  const fs::path out = testing::MakeTempDir("cli_report_out");
  const CliResult r = Invoke({"report", "--run", dp.string(), "--reference", ref.string(), "--out",
                           out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream csv(out / "report.csv");
  std::string header, ref_row, dp_row;
  std::getline(csv, header);
  std::getline(csv, ref_row);
  std::getline(csv, dp_row);
  std::vector<std::string> cells;
  std::stringstream ss(dp_row);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_NEAR(std::stod(cells[6]), 0.57, 0.005);
  EXPECT_NEAR(std::stod(cells[7]), 100.0 * 20.0 / 800.0, 1e-9);
  EXPECT_EQ(cells[5], "202.8");
}

}  // namespace
}  // namespace dpmob
