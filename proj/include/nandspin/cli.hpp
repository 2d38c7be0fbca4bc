/*
 * Copyright 2026 The nandspin-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "nandspin/config.hpp"
#include "nandspin/errors.hpp"
#include "nandspin/runtime.hpp"

namespace nandspin {

enum ExitCode : int { kExitOk = 0, kExitMismatch = 1, kExitParse = 2, kExitCapacity = 3, kExitInternal = 4 };

int exit_code_for(ErrorCode code);

struct CliArgs {
  std::optional<std::filesystem::path> config;
  std::filesystem::path model;
  std::filesystem::path input;
  std::filesystem::path out_dir = ".";
  bool trace = false;
  std::optional<int> threads;
  std::uint64_t seed = 0;
};

/// Files written by cmd_infer: output.json, report.json, report.csv,
/// plan.json and (with --trace) trace.jsonl.
int cmd_infer(const CliArgs& args, std::ostream& out, std::ostream& err);
/// Pure-integer pipeline; writes output.json.
int cmd_oracle(const CliArgs& args, std::ostream& out, std::ostream& err);
/// 0 iff both tensors are identical; otherwise prints up to 10 mismatches.
int cmd_diff(const std::filesystem::path& a, const std::filesystem::path& b, std::ostream& out, std::ostream& err);
/// Memory-mode round trips and signal-level truth tables on one subarray.
int cmd_memtest(const CliArgs& args, std::ostream& out, std::ostream& err);
/// Writes a random toy model and input (model.json, input.json) from --seed.
int cmd_gen(const CliArgs& args, std::ostream& out, std::ostream& err);

/// Output document shared by infer and oracle.
nlohmann::json output_document(const FixedPointTensor& t, std::optional<int> argmax);
/// One JSON object per line.
std::string trace_jsonl(const std::vector<TraceEvent>& trace);

int run_cli(int argc, char** argv);

}  // namespace nandspin
