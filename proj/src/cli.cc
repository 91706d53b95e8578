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

#include "dpmob/cli.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "dpmob/config.h"
#include "dpmob/data.h"
#include "dpmob/errors.h"
#include "dpmob/forecast.h"
#include "dpmob/model_io.h"
#include "dpmob/privacy.h"
#include "dpmob/tune.h"

#ifndef DPMOB_VERSION
#define DPMOB_VERSION "0.0.0"
#endif

namespace dpmob {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

std::ostream* g_warning_stream = nullptr;

void StreamWarning(const std::string& message) {
  if (g_warning_stream != nullptr) *g_warning_stream << "warning: " << message << '\n';
}

class WarningRedirect {
 public:
  explicit WarningRedirect(std::ostream& err) {
    g_warning_stream = &err;
    previous_ = SetWarningSink(&StreamWarning);
  }
  ~WarningRedirect() {
    SetWarningSink(previous_);
    g_warning_stream = nullptr;
  }

 private:
  WarningSink previous_;
};

std::string Sha256Hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Collects output files and writes manifest.json next to them.
class OutputDir {
 public:
  explicit OutputDir(std::string dir) : dir_(std::move(dir)) {
    if (dir_.empty()) throw ConfigError("--out is required for this command");
    fs::create_directories(dir_);
  }

  void Write(const std::string& name, const std::string& content) {
    const fs::path p = fs::path(dir_) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + p.string());
    outputs_[name] = Sha256Hex(content);
  }

  template <typename F>
  void WriteWith(const std::string& name, F&& writer) {
    std::ostringstream s;
    writer(s);
    Write(name, s.str());
  }

  void AddInput(const std::string& path) { inputs_[path] = Sha256Hex(ReadFile(path)); }

  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void WriteManifest(const std::string& command, const std::string& config_text,
                     const std::vector<std::uint64_t>& seeds) {
    json j;
    j["tool"] = "dpmob";
    j["version"] = Version();
    j["command"] = command;
    j["config"] = config_text;
    j["seeds"] = seeds;
    json inputs = json::array();
    for (const auto& [p, d] : inputs_) inputs.push_back({{"path", p}, {"sha256", d}});
    j["inputs"] = inputs;
    json outputs = json::array();
    for (const auto& [p, d] : outputs_) outputs.push_back({{"file", p}, {"sha256", d}});
    j["outputs"] = outputs;
    std::ofstream out(fs::path(dir_) / "manifest.json", std::ios::binary);
    out << j.dump(2) << '\n';
  }

 private:
  std::string dir_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

ExperimentConfig ResolveConfig(const GlobalOptions& g, bool required = true) {
  ExperimentConfig c;
  if (!g.config_path.empty()) {
    c = LoadConfig(g.config_path);
  } else if (required) {
    throw ConfigError("--config is required for this command");
  }
  if (g.seed) c.base_seed = *g.seed;
  if (g.jobs) {
    if (*g.jobs < 1) throw ConfigError("--jobs must be >= 1");
    c.settings.jobs = *g.jobs;
  }
  return c;
}

MobilitySeries LoadForRun(const ExperimentConfig& c) {
  if (c.dataset_path.empty()) throw ConfigError("data.path is not set");
  MobilitySeries s = LoadCsv(c.dataset_path);
  return c.clean ? IqrClean(s) : s;
}

void WriteLedger(OutputDir& out, const std::string& prefix, std::int64_t count, double eps,
                 double delta) {
  BudgetLedger ledger(count);
  ledger.AppendRepeated(prefix, count, eps, delta);
  out.WriteWith("ledger.csv", [&](std::ostream& s) { ledger.WriteCsv(s); });
}

RunArtifact RunConfigured(const ExperimentConfig& c, const MobilitySeries& cleaned,
                          const std::vector<std::uint64_t>& seeds) {
  switch (c.kind) {
    case RunKind::kBaseline:
      return RunBaseline(cleaned, c.settings);
    case RunKind::kNonPrivate:
      return RunNonPrivate(cleaned, c.settings, seeds);
    case RunKind::kGradientPerturbation:
      return RunGradientPerturbation(cleaned, c.settings, c.MakeDpConfig(), c.privacy.delta,
                                     seeds);
    case RunKind::kInputPerturbation:
      return RunInputPerturbation(cleaned, c.settings, c.privacy, c.noise_seed, seeds);
  }
  throw InvalidArgument("unknown run kind");
}

int CmdStats(const GlobalOptions& g, std::ostream& out) {
  const ExperimentConfig c = ResolveConfig(g);
  const MobilitySeries s = LoadForRun(c);
  const auto stats = DescriptiveStats(s);
  std::ostringstream csv;
  WriteStatsCsv(csv, s, stats);
  out << csv.str();
  if (!g.out_dir.empty()) {
    OutputDir dir(g.out_dir);
    dir.AddInput(c.dataset_path);
    dir.Write("stats.csv", csv.str());
    dir.WriteManifest("stats", c.text, {});
  }
  return kExitOk;
}

int CmdClean(const GlobalOptions& g, std::ostream& out) {
  const ExperimentConfig c = ResolveConfig(g);
  if (c.dataset_path.empty()) throw ConfigError("data.path is not set");
  OutputDir dir(g.out_dir);
  const MobilitySeries cleaned = IqrClean(LoadCsv(c.dataset_path));
  dir.AddInput(c.dataset_path);
  dir.WriteWith("cleaned.csv", [&](std::ostream& s) { WriteSeriesCsv(s, cleaned); });
  dir.WriteManifest("clean", c.text, {});
  out << fmt::format("cleaned {} slots x {} regions -> {}\n", cleaned.length(),
                     cleaned.num_regions(), dir.path("cleaned.csv"));
  return kExitOk;
}

int CmdSanitize(const GlobalOptions& g, std::ostream& out) {
  const ExperimentConfig c = ResolveConfig(g);
  const double sigma =
      GaussianSigma(c.privacy.l2_sensitivity, c.privacy.epsilon, c.privacy.delta);
  OutputDir dir(g.out_dir);
  const MobilitySeries cleaned = LoadForRun(c);
  const std::uint64_t noise_seed = g.seed ? *g.seed : c.noise_seed;
  RngStream rng(noise_seed, 0);
  const MobilitySeries noisy =
      SanitizeSeries(cleaned, c.privacy, rng, {.clamp_nonnegative = c.clamp_nonnegative});
  dir.AddInput(c.dataset_path);
  dir.WriteWith("sanitized.csv", [&](std::ostream& s) { WriteSeriesCsv(s, noisy); });
  const auto releases = static_cast<std::int64_t>(noisy.length());
  WriteLedger(dir, "snapshot-", releases, c.privacy.epsilon, c.privacy.delta);
  BudgetLedger totals;
  totals.AppendRepeated("", releases, c.privacy.epsilon, c.privacy.delta);
  const json summary = {{"mechanism", "gaussian"},
                        {"epsilon", c.privacy.epsilon},
                        {"delta", c.privacy.delta},
                        {"l2_sensitivity", c.privacy.l2_sensitivity},
                        {"sigma", sigma},
                        {"clamp_nonnegative", c.clamp_nonnegative},
                        {"noise_seed", noise_seed},
                        {"releases", releases},
                        {"epsilon_total", totals.Total().epsilon},
                        {"delta_total", totals.Total().delta},
                        {"config", c.text}};
  dir.Write("summary.json", summary.dump(2) + "\n");
  dir.WriteManifest("sanitize", c.text, {noise_seed});
  out << fmt::format("sigma={} releases={} epsilon_total={}\n", sigma, releases,
                     totals.Total().epsilon);
  return kExitOk;
}

struct AccountantArgs {
  std::optional<double> q;
  std::optional<int> batch;
  std::optional<std::int64_t> n;
  double noise_multiplier = 0.0;
  std::optional<std::int64_t> steps;
  std::optional<int> epochs;
  double delta = 0.0;
};

int CmdAccountant(const AccountantArgs& a, std::ostream& out, std::ostream& err) {
  double q = 0.0;
  if (a.q) {
    q = *a.q;
  } else if (a.batch && a.n) {
    if (*a.n < 1 || *a.batch < 1) throw InvalidArgument("--batch and --n must be >= 1");
    q = static_cast<double>(*a.batch) / static_cast<double>(*a.n);
  } else {
    throw ConfigError("give --q, or --batch together with --n");
  }
  std::int64_t steps = 0;
  if (a.steps) {
    steps = *a.steps;
  } else if (a.epochs && a.batch && a.n) {
    steps = ExpectedSteps(*a.n, *a.batch, *a.epochs);
  } else {
    throw ConfigError("give --steps, or --epochs with --batch and --n");
  }
  const EpsilonResult r = ComputeEpsilon(q, a.noise_multiplier, steps, a.delta);
  if (steps == 0) {
    err << "warning: 0 steps; epsilon reduces to ln(1/delta)/(alpha-1) at the largest order\n";
  }
  out << fmt::format("eps={} at order={} (delta={})\n", r.epsilon, r.order, a.delta);
  return kExitOk;
}

int CmdTrain(const GlobalOptions& g, std::ostream& out) {
  const ExperimentConfig c = ResolveConfig(g);
  OutputDir dir(g.out_dir);
  const MobilitySeries cleaned = LoadForRun(c);
  const std::vector<std::uint64_t> seeds =
      c.kind == RunKind::kBaseline ? std::vector<std::uint64_t>{} : c.Seeds();
  const RunArtifact run = RunConfigured(c, cleaned, seeds);
  dir.AddInput(c.dataset_path);
  const RunArtifact* runs[] = {&run};
  dir.WriteWith("metrics.csv", [&](std::ostream& s) { WriteMetricsCsv(s, runs); });
  dir.WriteWith("predictions.csv", [&](std::ostream& s) { WritePredictionsCsv(s, run); });
  dir.WriteWith("summary.json", [&](std::ostream& s) { WriteSummaryJson(s, run, c.text); });
  if (run.kind != RunKind::kBaseline) {
    const SeedRun& best = run.runs[run.best];
    dir.WriteWith("trainlog.csv", [&](std::ostream& s) { best.log.WriteCsv(s); });
    dir.WriteWith("model.bin", [&](std::ostream& s) { WriteModel(s, run.spec, best.params); });
  }
  if (run.gradient_privacy) {
    const auto& gp = *run.gradient_privacy;
    WriteLedger(dir, "sample-", gp.n_train, gp.epsilon, gp.delta);
  }
  if (run.input_privacy) {
    const auto& ip = *run.input_privacy;
    WriteLedger(dir, "snapshot-", ip.releases, ip.record.epsilon, ip.record.delta);
  }
  dir.WriteManifest("train", c.text, seeds);
  const MetricsReport& m = run.metrics();
  out << fmt::format("{}: mean_rmse={} mean_mae={}", ToString(run.kind), m.mean_rmse,
                     m.mean_mae);
  if (run.gradient_privacy) {
    out << fmt::format(" eps={} eps_total={}", run.gradient_privacy->epsilon,
                       run.gradient_privacy->epsilon_total);
  }
  if (run.input_privacy) {
    out << fmt::format(" eps={} eps_total={}", run.input_privacy->record.epsilon,
                       run.input_privacy->epsilon_total);
  }
  out << '\n';
  return kExitOk;
}

int CmdTune(const GlobalOptions& g, std::ostream& out) {
  const ExperimentConfig c = ResolveConfig(g);
  OutputDir dir(g.out_dir);
  const MobilitySeries cleaned = LoadForRun(c);
  SearchSpace space;
  if (c.tune_private) {
    space.clip_choices = c.tune_clip_choices;
    space.noise_multiplier = c.noise_multiplier;
  }
  TrialPipeline pipeline = [&](const TrialConfig& t, std::uint64_t seed) {
    ExperimentSettings s = c.settings;
    s.hidden_size = t.h1;
    s.batch_size = t.batch;
    s.learning_rate = t.learning_rate;
    s.jobs = 1;
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < c.tune_seeds_per_trial; ++i) seeds.push_back(seed + i);
    TrialOutcome o;
    if (t.clip) {
      DpSgdConfig dp = c.MakeDpConfig();
      dp.l2_norm_clip = *t.clip;
      dp.noise_multiplier = *t.noise_multiplier;
      dp.batch_size = t.batch;
      dp.num_microbatches = c.num_microbatches > 0 ? c.num_microbatches : t.batch;
      const RunArtifact a = RunGradientPerturbation(cleaned, s, dp, c.privacy.delta, seeds);
      o.metrics = a.metrics();
      o.epsilon = a.gradient_privacy->epsilon;
    } else {
      o.metrics = RunNonPrivate(cleaned, s, seeds).metrics();
    }
    return o;
  };
  SearchOptions opts;
  opts.budget = c.tune_budget;
  opts.strategy = c.tune_strategy;
  opts.jobs = c.settings.jobs;
  RngStream rng(c.base_seed, 7);
  const TuneResult result = RunSearch(space, pipeline, opts, rng);
  dir.AddInput(c.dataset_path);
  dir.WriteWith("trials.csv", [&](std::ostream& s) { WriteTrialsCsv(s, result); });
  const Trial& b = result.best_trial();
  json summary = {{"strategy", ToString(c.tune_strategy)},
                  {"budget", c.tune_budget},
                  {"private", c.tune_private},
                  {"seeds_per_trial", c.tune_seeds_per_trial},
                  {"best_trial", b.id},
                  {"best",
                   {{"h1", b.config.h1},
                    {"batch", b.config.batch},
                    {"learning_rate", b.config.learning_rate},
                    {"objective", b.objective},
                    {"mean_rmse", b.metrics.mean_rmse}}},
                  {"config", c.text}};
  if (b.config.clip) summary["best"]["clip"] = *b.config.clip;
  if (b.epsilon) summary["best"]["epsilon"] = *b.epsilon;
  dir.Write("summary.json", summary.dump(2) + "\n");
  dir.WriteManifest("tune", c.text, {c.base_seed});
  out << fmt::format("best trial {}: h1={} batch={} lr={} objective={}\n", b.id, b.config.h1,
                     b.config.batch, b.config.learning_rate, b.objective);
  return kExitOk;
}

int CmdEvaluate(const GlobalOptions& g, const std::string& model_path, std::ostream& out) {
  const ExperimentConfig c = ResolveConfig(g);
  OutputDir dir(g.out_dir);
  const MobilitySeries cleaned = LoadForRun(c);
  const LoadedModel model = LoadModel(model_path);
  MobilitySeries visible = cleaned;
  if (c.kind == RunKind::kInputPerturbation) {
    RngStream rng(c.noise_seed, 0);
    visible = SanitizeSeries(cleaned, c.privacy, rng);
  }
  Tensor predictions;
  const MetricsReport m =
      EvaluateModel(visible, cleaned, c.settings, model.spec, model.params, &predictions);
  dir.AddInput(c.dataset_path);
  dir.AddInput(model_path);
  std::ostringstream csv;
  csv << "region,rmse,mae\n";
  for (std::size_t r = 0; r < m.rmse.size(); ++r) {
    csv << fmt::format("{},{},{}\n", cleaned.regions()[r], m.rmse[r], m.mae[r]);
  }
  csv << fmt::format("Mean,{},{}\n", m.mean_rmse, m.mean_mae);
  dir.Write("metrics.csv", csv.str());
  dir.WriteManifest("evaluate", c.text, {});
  out << fmt::format("mean_rmse={} mean_mae={}\n", m.mean_rmse, m.mean_mae);
  return kExitOk;
}

json ReadSummary(const std::string& run_dir) {
  const std::string path = (fs::path(run_dir) / "summary.json").string();
  try {
    return json::parse(ReadFile(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

int CmdReport(const GlobalOptions& g, const std::vector<std::string>& run_dirs,
              const std::string& reference_dir, std::ostream& out) {
  OutputDir dir(g.out_dir);
  const json ref = ReadSummary(reference_dir);
  const double ref_rmse = ref.at("metrics").at("mean_rmse").get<double>();
  const double ref_mae = ref.at("metrics").at("mean_mae").get<double>();
  std::ostringstream csv;
  csv << "run,run_kind,mean_rmse,mean_mae,epsilon,epsilon_total,utility_loss_rmse,"
         "utility_loss_mae\n";
  auto row = [&](const std::string& name, const json& s) {
    const double rmse = s.at("metrics").at("mean_rmse").get<double>();
    const double mae = s.at("metrics").at("mean_mae").get<double>();
    std::string eps, eps_total;
    if (s.contains("privacy")) {
      eps = fmt::format("{}", s["privacy"].at("epsilon").get<double>());
      eps_total = fmt::format("{}", s["privacy"].at("epsilon_total").get<double>());
    }
    csv << fmt::format("{},{},{},{},{},{},{},{}\n", name, s.at("run_kind").get<std::string>(),
                       rmse, mae, eps, eps_total, UtilityLoss(rmse, ref_rmse),
                       UtilityLoss(mae, ref_mae));
  };
  row(fs::path(reference_dir).filename().string(), ref);
  for (const std::string& d : run_dirs) row(fs::path(d).filename().string(), ReadSummary(d));
  dir.AddInput((fs::path(reference_dir) / "summary.json").string());
  for (const std::string& d : run_dirs) dir.AddInput((fs::path(d) / "summary.json").string());
  dir.Write("report.csv", csv.str());
  dir.WriteManifest("report", "", {});
  out << csv.str();
  return kExitOk;
}

}  // namespace

std::string Version() { return DPMOB_VERSION; }

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  WarningRedirect redirect(err);
  CLI::App app{"Differentially private mobility forecasting", "dpmob"};
  app.require_subcommand(1);
  app.set_version_flag("--version", Version());
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Experiment configuration (INI)");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--seed", g.seed, "Base seed; runs use seed, seed + 1, ...");
  app.add_option("--jobs", g.jobs, "Parallel seeds or trials");

  auto* stats = app.add_subcommand("stats", "Per-region descriptive statistics");
  auto* clean = app.add_subcommand("clean", "IQR-clean the dataset");
  auto* sanitize = app.add_subcommand("sanitize", "Gaussian-mechanism input perturbation");
  auto* accountant = app.add_subcommand("accountant", "DP-SGD privacy accountant");
  AccountantArgs acc;
  accountant->add_option("--q", acc.q, "Sampling rate");
  accountant->add_option("--batch", acc.batch, "Batch size");
  accountant->add_option("--n", acc.n, "Training population size");
  accountant->add_option("--noise-multiplier", acc.noise_multiplier)->required();
  accountant->add_option("--steps", acc.steps, "Optimizer steps");
  accountant->add_option("--epochs", acc.epochs, "Epochs (steps = epochs * floor(n / batch))");
  accountant->add_option("--delta", acc.delta)->required();
  auto* train = app.add_subcommand("train", "Run the configured pipeline");
  auto* tune = app.add_subcommand("tune", "Hyperparameter search");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a saved model");
  std::string model_path;
  evaluate->add_option("--model", model_path, "model.bin from a train run")->required();
  auto* report = app.add_subcommand("report", "Utility loss against a reference run");
  std::vector<std::string> run_dirs;
  std::string reference_dir;
  report->add_option("--run", run_dirs, "Run output directory")->required();
  report->add_option("--reference", reference_dir, "Non-private reference run")->required();

  // Global flags are accepted before or after the command name.
  for (CLI::App* sub : {stats, clean, sanitize, accountant, train, tune, evaluate, report}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*stats) return CmdStats(g, out);
    if (*clean) return CmdClean(g, out);
    if (*sanitize) return CmdSanitize(g, out);
    if (*accountant) return CmdAccountant(acc, out, err);
    if (*train) return CmdTrain(g, out);
    if (*tune) return CmdTune(g, out);
    if (*evaluate) return CmdEvaluate(g, model_path, out);
    if (*report) return CmdReport(g, run_dirs, reference_dir, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace dpmob
