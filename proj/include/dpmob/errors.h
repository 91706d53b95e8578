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

#ifndef DPMOB_ERRORS_H_
#define DPMOB_ERRORS_H_

#include <stdexcept>
#include <string>

namespace dpmob {

// Bad argument values or shapes.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A privacy mechanism was asked to run outside the parameter range in which
// its guarantee holds (e.g. the classic Gaussian mechanism with epsilon >= 1).
class OutOfValidity : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// An object was used in a state that no longer matches its producer, e.g. a
// forward tape replayed against parameters that have since been updated.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed input files. `line` is 1-based, 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                    : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(int epoch)
      : std::runtime_error("training diverged (non-finite loss) in epoch " +
                           std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Generic runtime failure of a pipeline or search.
class RunFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration files and command-line usage.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Emits a warning through the process-wide sink (stderr by default).
void Warn(const std::string& message);

// Replaces the warning sink; returns the previous one. Passing nullptr
// restores the default stderr sink.
using WarningSink = void (*)(const std::string&);
WarningSink SetWarningSink(WarningSink sink);

}  // namespace dpmob

#endif  // DPMOB_ERRORS_H_
