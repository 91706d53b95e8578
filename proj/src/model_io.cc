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

#include "dpmob/model_io.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "dpmob/errors.h"

namespace dpmob {
namespace {

constexpr char kMagic[8] = {'D', 'P', 'M', 'O', 'B', 'N', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "model files are written in host order; big-endian hosts need byte swaps");

template <typename T>
void Put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ParseError("truncated model file", 0);
  }
  return v;
}

std::string GetString(std::istream& in) {
  const auto n = Get<std::uint32_t>(in);
  if (n > (1u << 20)) throw ParseError("implausible string length in model file", 0);
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw ParseError("truncated model file", 0);
  return s;
}

void PutString(std::ostream& out, const std::string& s) {
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace

std::string EncodeSpec(const ModelSpec& spec) {
  std::ostringstream os;
  os << "cell=" << ToString(spec.cell) << ";bidirectional=" << (spec.bidirectional ? 1 : 0)
     << ";hidden_size=" << spec.hidden_size << ";input_size=" << spec.input_size
     << ";output_size=" << spec.output_size << ";activation=" << ToString(spec.activation);
  return os.str();
}

ModelSpec DecodeSpec(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParseError("bad spec entry '" + item + "'", 0);
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  auto need = [&kv](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(std::string("spec is missing ") + key, 0);
    return it->second;
  };
  ModelSpec spec;
  spec.cell = ParseCellKind(need("cell"));
  spec.bidirectional = need("bidirectional") == "1";
  spec.hidden_size = std::stoi(need("hidden_size"));
  spec.input_size = std::stoi(need("input_size"));
  spec.output_size = std::stoi(need("output_size"));
  spec.activation = ParseActivation(need("activation"));
  spec.Validate();
  return spec;
}

void WriteModel(std::ostream& out, const ModelSpec& spec, const ModelParams& params) {
  params.Validate(spec);
  out.write(kMagic, sizeof(kMagic));
  PutString(out, EncodeSpec(spec));
  const auto named = params.Named();
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    PutString(out, name);
    Put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape()) Put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
}

void SaveModel(const std::string& path, const ModelSpec& spec,
               const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RunFailed("cannot open " + path + " for writing");
  WriteModel(out, spec, params);
  if (!out) throw RunFailed("failed writing " + path);
}

LoadedModel ReadModel(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not a dpmob model file", 0);
  }
  LoadedModel m;
  m.spec = DecodeSpec(GetString(in));
  m.params = ModelParams::Zeros(m.spec);
  auto named = m.params.Named();
  const auto count = Get<std::uint32_t>(in);
  if (count != named.size()) throw ParseError("tensor count does not match spec", 0);
  for (auto& [expected_name, t] : named) {
    const std::string name = GetString(in);
    if (name != expected_name) {
      throw ParseError("expected tensor '" + expected_name + "', found '" + name + "'", 0);
    }
    const auto rank = Get<std::uint32_t>(in);
    Shape shape(rank);
    for (auto& d : shape) d = Get<std::uint64_t>(in);
    if (shape != t->shape()) throw ParseError("tensor '" + name + "' has wrong shape", 0);
    if (!in.read(reinterpret_cast<char*>(t->data()),
                 static_cast<std::streamsize>(t->size() * sizeof(double)))) {
      throw ParseError("truncated model file", 0);
    }
  }
  m.params.Touch();
  return m;
}

LoadedModel LoadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunFailed("cannot open " + path);
  return ReadModel(in);
}

}  // namespace dpmob
