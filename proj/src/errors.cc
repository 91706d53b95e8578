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

#include "dpmob/errors.h"

#include <atomic>
#include <iostream>

namespace dpmob {
namespace {

void StderrSink(const std::string& message) {
  std::cerr << "warning: " << message << '\n';
}

std::atomic<WarningSink> g_sink{&StderrSink};

}  // namespace

void Warn(const std::string& message) { g_sink.load()(message); }

WarningSink SetWarningSink(WarningSink sink) {
  return g_sink.exchange(sink != nullptr ? sink : &StderrSink);
}

}  // namespace dpmob
