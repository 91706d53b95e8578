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

#ifndef DPMOB_MODEL_IO_H_
#define DPMOB_MODEL_IO_H_

#include <iosfwd>
#include <string>

#include "dpmob/neural.h"

namespace dpmob {

// Flat named-tensor container:
//
//   magic "DPMOBNT1"
//   u32 spec_len, spec_len bytes   "cell=gru;bidirectional=1;..." text
//   u32 count
//   count x { u32 name_len, name bytes, u32 rank, rank x u64 dim,
//             prod(dim) x f64 }
//
// All integers and doubles little-endian; doubles are written as their raw
// IEEE-754 bit patterns so a save/load round trip is bit-exact.
void WriteModel(std::ostream& out, const ModelSpec& spec, const ModelParams& params);
void SaveModel(const std::string& path, const ModelSpec& spec,
               const ModelParams& params);

struct LoadedModel {
  ModelSpec spec;
  ModelParams params;
};

LoadedModel ReadModel(std::istream& in);
LoadedModel LoadModel(const std::string& path);

std::string EncodeSpec(const ModelSpec& spec);
ModelSpec DecodeSpec(const std::string& text);

}  // namespace dpmob

#endif  // DPMOB_MODEL_IO_H_
