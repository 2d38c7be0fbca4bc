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

#include "nandspin/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "nandspin/errors.hpp"

namespace nandspin {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ParseError, path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::InvalidParameter, path.string() + ": cannot write file");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points one past the offending character.
    const std::size_t pos = e.byte == 0 ? 0 : std::min<std::size_t>(e.byte - 1, text.size());
    int line = 1, col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    if (auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
    fail(ErrorCode::ParseError, source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
}

json load_json_file(const std::filesystem::path& path) { return parse_json(read_text_file(path), path.string()); }

ModelSpec load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(load_json_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError && std::string(e.what()).rfind(path.string(), 0) != 0)
      fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    throw;
  }
}

namespace {

void flatten(const json& v, std::vector<std::int64_t>& out) {
  if (v.is_array()) {
    for (const auto& x : v) flatten(x, out);
    return;
  }
  if (!v.is_number_integer()) fail(ErrorCode::ParseError, "tensor values must be integers");
  out.push_back(v.get<std::int64_t>());
}

std::int32_t read_i32(std::string_view bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) fail(ErrorCode::ParseError, "binary tensor truncated at byte " + std::to_string(pos));
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= std::uint32_t(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  pos += 4;
  std::int32_t v;
  std::memcpy(&v, &u, sizeof v);
  return v;
}

void write_i32(std::string& out, std::int64_t v) {
  const auto u = static_cast<std::uint32_t>(static_cast<std::int32_t>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

}  // namespace

FixedPointTensor tensor_from_json(const json& j, std::optional<int> default_bits) {
  if (!j.is_object()) fail(ErrorCode::ParseError, "tensor must be an object");
  if (!j.contains("dims") || !j.contains("values")) fail(ErrorCode::ParseError, "tensor needs 'dims' and 'values'");
  FixedPointTensor t;
  try {
    t.dims = j.at("dims").get<std::vector<int>>();
  } catch (const json::exception&) {
    fail(ErrorCode::ParseError, "tensor dims must be an array of integers");
  }
  if (j.contains("bits")) {
    if (!j["bits"].is_number_integer()) fail(ErrorCode::ParseError, "tensor bits must be an integer");
    t.bit_width = j["bits"].get<int>();
  } else if (default_bits) {
    t.bit_width = *default_bits;
  } else {
    fail(ErrorCode::ParseError, "tensor needs 'bits'");
  }
  flatten(j["values"], t.values);
  t.validate();
  return t;
}

json tensor_to_json(const FixedPointTensor& t) {
  return {{"dims", t.dims}, {"bits", t.bit_width}, {"values", t.values}};
}

FixedPointTensor tensor_from_binary(std::string_view bytes, int bits) {
  std::size_t pos = 0;
  const int rank = read_i32(bytes, pos);
  if (rank < 1 || rank > 8) fail(ErrorCode::ParseError, "binary tensor rank " + std::to_string(rank));
  FixedPointTensor t;
  t.bit_width = bits;
  for (int i = 0; i < rank; ++i) t.dims.push_back(read_i32(bytes, pos));
  std::size_t n = 1;
  for (int d : t.dims) {
    if (d < 1) fail(ErrorCode::ParseError, "binary tensor dims must be positive");
    n *= static_cast<std::size_t>(d);
  }
  if (bytes.size() != pos + 4 * n)
    fail(ErrorCode::ParseError, "binary tensor holds " + std::to_string(bytes.size()) + " bytes, expected " +
                                    std::to_string(pos + 4 * n));
  for (std::size_t i = 0; i < n; ++i) t.values.push_back(read_i32(bytes, pos));
  t.validate();
  return t;
}

std::string tensor_to_binary(const FixedPointTensor& t) {
  std::string out;
  write_i32(out, static_cast<std::int64_t>(t.dims.size()));
  for (int d : t.dims) write_i32(out, d);
  for (auto v : t.values) write_i32(out, v);
  return out;
}

FixedPointTensor load_tensor(const std::filesystem::path& path, std::optional<int> default_bits) {
  const std::string text = read_text_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  try {
    if (first != std::string::npos && text[first] == '{')
      return tensor_from_json(parse_json(text, path.string()), default_bits);
    return tensor_from_binary(text, default_bits.value_or(8));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError && std::string(e.what()).rfind(path.string(), 0) != 0)
      fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    throw;
  }
}

}  // namespace nandspin
