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

#ifndef DPMOB_CLI_H_
#define DPMOB_CLI_H_

#include <iosfwd>
#include <string>

namespace dpmob {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// The dpmob command line. Commands: stats, clean, sanitize, accountant, train,
// tune, evaluate, report. Returns the process exit code: 0 on success, 1 for
// runtime failures, 2 for usage, parse and configuration errors.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Library version recorded in manifests.
std::string Version();

}  // namespace dpmob

#endif  // DPMOB_CLI_H_
