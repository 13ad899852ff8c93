//
// Copyright 2026 The ON-OFF Privacy Authors
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
//

// Commands behind the `onoff` binary. Each command fills a CommandOutput;
// RunCli parses arguments, dispatches and writes the artifact to --out or
// stdout.

#ifndef ONOFF_TOOLS_COMMANDS_H_
#define ONOFF_TOOLS_COMMANDS_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "nlohmann/json.hpp"
#include "onoff/markov.h"

namespace onoff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitGateFailure = 1;
inline constexpr int kExitConfigError = 2;

struct RunConfig {
  std::string command;
  // Inline JSON or a path to a JSON file.
  std::string chain;
  std::optional<int> n;
  std::optional<double> alpha;
  int delta = 1;
  std::optional<int> delta_max;
  // sweep-alpha grid; empty means the default grid.
  std::vector<double> alphas;
  int horizon = 100;
  int sessions = 1;
  uint64_t seed = 0;
  std::string schedule = "on-at-0";
  int message_length = 32;
  double tol = 1e-9;
  // Scheme JSON for verify; empty means build one.
  std::string scheme;
  std::string form = "multiset";
  std::string out;
};

// Either a CSV table or a JSON document.
struct CommandOutput {
  int exit_code = kExitOk;
  std::optional<std::string> csv;
  std::optional<nlohmann::json> json;
};

// The chain from --chain, or symmetric(--n, --alpha). InvalidArgument unless
// exactly one source is given.
absl::StatusOr<TransitionMatrix> ResolveChain(const RunConfig& config);

// 0, 0.01, ..., 0.33, then 1/3 + 0.01 k up to 0.99333.
std::vector<double> DefaultAlphaGrid();

// %#.6g
std::string Display(double v);
// %.17g
std::string Raw(double v);

absl::StatusOr<CommandOutput> CmdBounds(const RunConfig& config);
absl::StatusOr<CommandOutput> CmdSweepAlpha(const RunConfig& config);
absl::StatusOr<CommandOutput> CmdScheme(const RunConfig& config);
absl::StatusOr<CommandOutput> CmdVerify(const RunConfig& config);
absl::StatusOr<CommandOutput> CmdLp(const RunConfig& config);
// A .csv --out receives the step trace; otherwise a JSON summary is emitted.
absl::StatusOr<CommandOutput> CmdSimulate(const RunConfig& config);

absl::StatusOr<CommandOutput> Dispatch(const RunConfig& config);

// Full entry point; `args` excludes the program name. Returns the process
// exit code.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace onoff::cli

#endif  // ONOFF_TOOLS_COMMANDS_H_
