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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "nandspin/runtime.hpp"

namespace nandspin {

enum class Mode { Memtest, Infer, Oracle, Diff };

/// Everything a run needs besides the model and input.
///
/// Config document (all keys optional):
///   {"geometry": {"device_rows", "bit_rows", "columns", "group_size",
///                 "buffer_rows", "counter_width"},
///    "mats": {"subarray_rows", "subarray_cols", "mat_rows", "mat_cols", "bus_width"},
///    "cost": {<CostParams field>: value, ...},
///    "program_check": "strict" | "permissive",
///    "threads": N, "trace": bool}
struct RunConfig {
  RunOptions options;
  Mode mode = Mode::Infer;
  std::filesystem::path out_dir = ".";
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  /// Throws ParseError on malformed or inconsistent values.
  static RunConfig from_json(const nlohmann::json& j);
};

/// Loads `path`, or the file named by NANDSPIN_CONFIG when `path` is empty,
/// or the defaults when neither is set.
RunConfig load_config(const std::optional<std::filesystem::path>& path);

}  // namespace nandspin
