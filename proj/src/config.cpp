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

#include "nandspin/config.hpp"

#include <cstdlib>

#include "nandspin/errors.hpp"
#include "nandspin/io.hpp"

namespace nandspin {

using nlohmann::json;

void RunConfig::validate() const {
  options.geometry.validate();
  options.mats.validate();
  options.params.validate();
  if (options.threads < 1) fail(ErrorCode::InvalidParameter, "threads must be >= 1");
}

json RunConfig::to_json() const {
  const auto& g = options.geometry;
  const auto& m = options.mats;
  return {{"geometry",
           {{"device_rows", g.device_rows},
            {"bit_rows", g.bit_rows()},
            {"columns", g.columns},
            {"group_size", g.group_size},
            {"buffer_rows", g.buffer_rows},
            {"counter_width", g.counter_width}}},
          {"mats",
           {{"subarray_rows", m.subarray_rows},
            {"subarray_cols", m.subarray_cols},
            {"mat_rows", m.mat_rows},
            {"mat_cols", m.mat_cols},
            {"bus_width", m.bus_width}}},
          {"cost", options.params.to_json()},
          {"program_check", options.check == ProgramCheck::Strict ? "strict" : "permissive"},
          {"threads", options.threads},
          {"trace", options.trace}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    if (!j.is_object()) fail(ErrorCode::ParseError, "config must be an object");
    auto& g = c.options.geometry;
    if (auto it = j.find("geometry"); it != j.end()) {
      const json& gj = *it;
      g.group_size = gj.value("group_size", g.group_size);
      g.columns = gj.value("columns", g.columns);
      g.buffer_rows = gj.value("buffer_rows", g.buffer_rows);
      g.counter_width = gj.value("counter_width", g.counter_width);
      g.device_rows = gj.value("device_rows", g.device_rows);
      if (gj.contains("bit_rows")) {
        const int bit_rows = gj.at("bit_rows").get<int>();
        if (g.group_size < 1 || bit_rows % g.group_size != 0)
          fail(ErrorCode::ParseError, "config: bit_rows " + std::to_string(bit_rows) +
                                          " is not divisible by group_size " + std::to_string(g.group_size));
        if (gj.contains("device_rows") && gj.at("device_rows").get<int>() * g.group_size != bit_rows)
          fail(ErrorCode::ParseError, "config: bit_rows disagrees with device_rows * group_size");
        g.device_rows = bit_rows / g.group_size;
      }
    }
    auto& m = c.options.mats;
    if (auto it = j.find("mats"); it != j.end()) {
      m.subarray_rows = it->value("subarray_rows", m.subarray_rows);
      m.subarray_cols = it->value("subarray_cols", m.subarray_cols);
      m.mat_rows = it->value("mat_rows", m.mat_rows);
      m.mat_cols = it->value("mat_cols", m.mat_cols);
      m.bus_width = it->value("bus_width", m.bus_width);
    }
    if (auto it = j.find("cost"); it != j.end()) {
      json cost = *it;
      cost.erase("estimated");
      c.options.params = CostParams::from_json(cost);
    }
    c.options.params.group_size = g.group_size;
    if (auto it = j.find("program_check"); it != j.end()) {
      const auto v = it->get<std::string>();
      if (v == "strict")
        c.options.check = ProgramCheck::Strict;
      else if (v == "permissive")
        c.options.check = ProgramCheck::Permissive;
      else
        fail(ErrorCode::ParseError, "config: program_check must be 'strict' or 'permissive'");
    }
    c.options.threads = j.value("threads", c.options.threads);
    c.options.trace = j.value("trace", c.options.trace);
    c.validate();
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    fail(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path) {
  std::optional<std::filesystem::path> p = path;
  if (!p) {
    if (const char* env = std::getenv("NANDSPIN_CONFIG"); env && *env) p = env;
  }
  if (!p) return RunConfig{};
  try {
    return RunConfig::from_json(load_json_file(*p));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError && std::string(e.what()).rfind(p->string(), 0) != 0)
      fail(ErrorCode::ParseError, p->string() + ": " + e.what());
    throw;
  }
}

}  // namespace nandspin
