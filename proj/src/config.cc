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

#include "dpmob/config.h"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "dpmob/errors.h"

namespace dpmob {
namespace {

namespace pt = boost::property_tree;

template <typename T>
T ParseNumber(const std::string& key, const std::string& raw) {
  T v{};
  const char* end = raw.data() + raw.size();
  auto [ptr, ec] = std::from_chars(raw.data(), end, v);
  if (ec != std::errc() || ptr != end || raw.empty()) {
    throw ConfigError(fmt::format("{}: cannot parse '{}' as a number", key, raw));
  }
  return v;
}

bool ParseBool(const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
  if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, raw));
}

std::vector<double> ParseList(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError(key + ": empty list element");
    out.push_back(ParseNumber<double>(key, item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

template <typename F>
auto Wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(fmt::format("{}: {}", key, e.what()));
  }
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key,
                                  const std::string& raw)>;

const std::map<std::string, std::map<std::string, Setter>>& Schema() {
  static const auto* schema = new std::map<std::string, std::map<std::string, Setter>>{
      {"data",
       {
           {"path", [](auto& c, auto&, auto& v) { c.dataset_path = v; }},
           {"clean", [](auto& c, auto& k, auto& v) { c.clean = ParseBool(k, v); }},
           {"lag", [](auto& c, auto& k, auto& v) {
              c.settings.lag = ParseNumber<std::size_t>(k, v);
            }},
           {"train_days", [](auto& c, auto& k, auto& v) {
              c.settings.train_days = ParseNumber<int>(k, v);
            }},
           {"test_days", [](auto& c, auto& k, auto& v) {
              c.settings.test_days = ParseNumber<int>(k, v);
            }},
           {"scale", [](auto& c, auto& k, auto& v) { c.settings.scale = ParseBool(k, v); }},
       }},
      {"model",
       {
           {"cell", [](auto& c, auto& k, auto& v) {
              c.settings.cell = Wrap(k, [&] { return ParseCellKind(v); });
            }},
           {"bidirectional", [](auto& c, auto& k, auto& v) {
              c.settings.bidirectional = ParseBool(k, v);
            }},
           {"h1", [](auto& c, auto& k, auto& v) {
              c.settings.hidden_size = ParseNumber<int>(k, v);
            }},
           {"activation", [](auto& c, auto& k, auto& v) {
              c.settings.activation = Wrap(k, [&] { return ParseActivation(v); });
            }},
       }},
      {"train",
       {
           {"kind", [](auto& c, auto& k, auto& v) {
              c.kind = Wrap(k, [&] { return ParseRunKind(v); });
            }},
           {"batch", [](auto& c, auto& k, auto& v) {
              c.settings.batch_size = ParseNumber<int>(k, v);
            }},
           {"lr", [](auto& c, auto& k, auto& v) {
              c.settings.learning_rate = ParseNumber<double>(k, v);
            }},
           {"epochs", [](auto& c, auto& k, auto& v) {
              c.settings.epochs = ParseNumber<int>(k, v);
            }},
           {"rmse_form", [](auto& c, auto& k, auto& v) {
              if (v == "conventional") {
                c.settings.rmse_form = RmseForm::kConventional;
              } else if (v == "literal") {
                c.settings.rmse_form = RmseForm::kLiteral;
              } else {
                throw ConfigError(k + ": expected conventional or literal");
              }
            }},
       }},
      {"dp",
       {
           {"clip", [](auto& c, auto& k, auto& v) { c.l2_norm_clip = ParseNumber<double>(k, v); }},
           {"noise_multiplier", [](auto& c, auto& k, auto& v) {
              c.noise_multiplier = ParseNumber<double>(k, v);
            }},
           {"microbatches", [](auto& c, auto& k, auto& v) {
              c.num_microbatches = ParseNumber<int>(k, v);
            }},
       }},
      {"privacy",
       {
           {"epsilon", [](auto& c, auto& k, auto& v) {
              c.privacy.epsilon = ParseNumber<double>(k, v);
            }},
           {"delta", [](auto& c, auto& k, auto& v) {
              c.privacy.delta = ParseNumber<double>(k, v);
            }},
           {"sensitivity", [](auto& c, auto& k, auto& v) {
              c.privacy.l2_sensitivity = ParseNumber<double>(k, v);
            }},
           {"clamp_nonnegative", [](auto& c, auto& k, auto& v) {
              c.clamp_nonnegative = ParseBool(k, v);
            }},
           {"noise_seed", [](auto& c, auto& k, auto& v) {
              c.noise_seed = ParseNumber<std::uint64_t>(k, v);
            }},
       }},
      {"tune",
       {
           {"budget", [](auto& c, auto& k, auto& v) { c.tune_budget = ParseNumber<int>(k, v); }},
           {"strategy", [](auto& c, auto& k, auto& v) {
              c.tune_strategy = Wrap(k, [&] { return ParseSearchStrategy(v); });
            }},
           {"private", [](auto& c, auto& k, auto& v) { c.tune_private = ParseBool(k, v); }},
           {"seeds_per_trial", [](auto& c, auto& k, auto& v) {
              c.tune_seeds_per_trial = ParseNumber<int>(k, v);
            }},
           {"clip_choices", [](auto& c, auto& k, auto& v) {
              c.tune_clip_choices = ParseList(k, v);
            }},
       }},
      {"run",
       {
           {"seeds", [](auto& c, auto& k, auto& v) { c.num_seeds = ParseNumber<int>(k, v); }},
           {"seed", [](auto& c, auto& k, auto& v) {
              c.base_seed = ParseNumber<std::uint64_t>(k, v);
            }},
           {"jobs", [](auto& c, auto& k, auto& v) {
              c.settings.jobs = ParseNumber<int>(k, v);
            }},
       }},
  };
  return *schema;
}

void CheckRanges(const ExperimentConfig& c) {
  const auto& s = c.settings;
  if (s.lag < 1) throw ConfigError("data.lag must be >= 1");
  if (s.train_days < 1 || s.test_days < 1) throw ConfigError("data split days must be >= 1");
  if (s.hidden_size < 1) throw ConfigError("model.h1 must be >= 1");
  if (s.batch_size < 1) throw ConfigError("train.batch must be >= 1");
  if (!(s.learning_rate > 0.0)) throw ConfigError("train.lr must be positive");
  if (s.epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (c.num_microbatches < 0) throw ConfigError("dp.microbatches must be >= 0");
  if (c.num_seeds < 1) throw ConfigError("run.seeds must be >= 1");
  if (s.jobs < 1) throw ConfigError("run.jobs must be >= 1");
  if (c.tune_budget < 1) throw ConfigError("tune.budget must be >= 1");
  if (c.tune_seeds_per_trial < 1) throw ConfigError("tune.seeds_per_trial must be >= 1");
}

}  // namespace

DpSgdConfig ExperimentConfig::MakeDpConfig() const {
  DpSgdConfig dp;
  dp.l2_norm_clip = l2_norm_clip;
  dp.noise_multiplier = noise_multiplier;
  dp.num_microbatches = num_microbatches > 0 ? num_microbatches : settings.batch_size;
  dp.batch_size = settings.batch_size;
  dp.epochs = settings.epochs;
  dp.learning_rate = settings.learning_rate;
  return dp;
}

std::vector<std::uint64_t> ExperimentConfig::Seeds() const {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < num_seeds; ++i) seeds.push_back(base_seed + static_cast<std::uint64_t>(i));
  return seeds;
}

ExperimentConfig ParseConfig(std::string_view text, const std::string& base_dir) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  ExperimentConfig c;
  c.text = std::string(text);
  const auto& schema = Schema();
  for (const auto& [section, body] : tree) {
    auto sit = schema.find(section);
    if (sit == schema.end() || !body.data().empty()) {
      throw ConfigError(fmt::format("unknown config section or top-level key '{}'", section));
    }
    for (const auto& [key, node] : body) {
      auto kit = sit->second.find(key);
      if (kit == sit->second.end()) {
        throw ConfigError(fmt::format("unknown config key '{}.{}'", section, key));
      }
      kit->second(c, section + "." + key, node.data());
    }
  }
  if (!c.dataset_path.empty()) {
    std::filesystem::path p(c.dataset_path);
    if (p.is_relative()) c.dataset_path = (std::filesystem::path(base_dir) / p).string();
  }
  CheckRanges(c);
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return ParseConfig(buf.str(), dir.empty() ? std::string(".") : dir.string());
}

}  // namespace dpmob
