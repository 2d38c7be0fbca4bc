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
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "nandspin/model.hpp"
#include "nandspin/tensor.hpp"

namespace nandspin {

std::string read_text_file(const std::filesystem::path& path);
/// Writes with LF line endings, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Parses JSON text; syntax errors become ParseError "<source>:<line>:<col>: ...".
nlohmann::json parse_json(std::string_view text, const std::string& source);
nlohmann::json load_json_file(const std::filesystem::path& path);

ModelSpec load_model(const std::filesystem::path& path);

/// Tensor document: {"dims": [...], "bits": k, "values": flat or nested}.
/// `bits` may be omitted when `default_bits` is given.
FixedPointTensor tensor_from_json(const nlohmann::json& j, std::optional<int> default_bits = std::nullopt);
nlohmann::json tensor_to_json(const FixedPointTensor& t);

/// Flat binary tensor: int32 LE rank, rank x int32 dims, then int32 values.
FixedPointTensor tensor_from_binary(std::string_view bytes, int bits);
std::string tensor_to_binary(const FixedPointTensor& t);

/// Loads a JSON or binary tensor (binary when the file does not start with
/// '{' after whitespace). Bits for binary input come from `default_bits`.
FixedPointTensor load_tensor(const std::filesystem::path& path, std::optional<int> default_bits);

}  // namespace nandspin
